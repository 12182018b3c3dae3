//! Dense n-dimensional `f64` arrays with tape-free reverse-mode autodiff.
//!
//! Every operation that touches a tensor requiring gradients records a
//! backward closure and its parents on the result. Node ids come from a
//! per-thread monotonic counter, so a node's parents always carry smaller
//! ids than the node itself; sorting the reachable nodes by descending id
//! therefore gives a reverse topological order with no explicit tape.
//!
//! Gradients of leaves accumulate across [`Tensor::backward`] calls until
//! the caller resets them with [`Tensor::zero_grad`].

pub(crate) mod matmul;
mod ops;
mod shape_ops;

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

pub use shape_ops::RowIndex;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Runs `f` with graph recording disabled. Results of every operation
/// inside are constants, regardless of their inputs.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let _restore = Restore(prev);
    f()
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Maps the upstream gradient (and the op's own output) to one optional
/// gradient per parent, in parent order.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64], &[f64]) -> Vec<Option<Vec<f64>>>>;

struct GradFn {
    name: &'static str,
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
}

/// Reference-counted handle to a graph node. Cloning is cheap and shares
/// the node.
#[derive(Clone)]
pub struct Tensor {
    node: Rc<Node>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.node.data.borrow();
        let preview: Vec<f64> = data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("id", &self.node.id)
            .field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad)
            .field("op", &self.node.grad_fn.as_ref().map(|g| g.name))
            .field("data", &preview)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn make(
        data: Vec<f64>,
        shape: Vec<usize>,
        requires_grad: bool,
        grad_fn: Option<GradFn>,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            node: Rc::new(Node {
                id: next_id(),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                grad_fn,
            }),
        }
    }

    /// Constant (non-differentiable) tensor.
    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Contract(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        if numel(shape) != data.len() {
            return Err(Error::dim("from_vec", shape, &[data.len()]));
        }
        Ok(Self::make(data, shape.to_vec(), false, None))
    }

    /// Trainable leaf: gradients accumulate into it during backward.
    pub fn parameter(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        let t = Self::from_vec(data, shape)?;
        Ok(Self::make(t.to_vec(), shape.to_vec(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::make(vec![0.0; numel(shape)], shape.to_vec(), false, None)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::make(vec![value; numel(shape)], shape.to_vec(), false, None)
    }

    pub fn scalar(value: f64) -> Self {
        Self::make(vec![value], Vec::new(), false, None)
    }

    /// Records an operation result. When recording is disabled or no parent
    /// needs gradients the backward closure is dropped immediately.
    pub(crate) fn from_op(
        name: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f64], &[f64]) -> Vec<Option<Vec<f64>>> + 'static,
    ) -> Self {
        let track = grad_enabled() && parents.iter().any(Tensor::requires_grad);
        if track {
            let grad_fn = GradFn {
                name,
                parents,
                backward: Box::new(backward),
            };
            Self::make(data, shape, true, Some(grad_fn))
        } else {
            Self::make(data, shape, false, None)
        }
    }

    pub fn id(&self) -> u64 {
        self.node.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn rank(&self) -> usize {
        self.node.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.node.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.node.grad_fn.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.node.grad_fn.as_ref().map(|g| g.name)
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.node.data.borrow()
    }

    /// Mutable access to the values. Intended for optimizer updates on
    /// leaves; mutating an interior node invalidates its recorded backward.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.node.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.node.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let d = self.node.data.borrow();
        assert_eq!(d.len(), 1, "item() on tensor of shape {:?}", self.shape());
        d[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.node.grad.borrow().clone()
    }

    pub fn grad_ref(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.node.grad.borrow()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Tensor {
        Self::make(self.to_vec(), self.shape().to_vec(), false, None)
    }

    /// Propagates d(self)/d(leaf) into every reachable leaf that requires
    /// gradients. `self` must hold exactly one element.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        // Collect every reachable node that participates in gradients.
        let mut nodes: Vec<Tensor> = Vec::new();
        let mut seen: HashMap<u64, ()> = HashMap::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if seen.insert(t.id(), ()).is_some() {
                continue;
            }
            if let Some(gf) = &t.node.grad_fn {
                for p in &gf.parents {
                    if p.requires_grad() && !seen.contains_key(&p.id()) {
                        stack.push(p.clone());
                    }
                }
            }
            nodes.push(t);
        }
        nodes.sort_unstable_by_key(|n| std::cmp::Reverse(n.id()));

        let mut pending: HashMap<u64, Vec<f64>> = HashMap::new();
        pending.insert(self.id(), vec![1.0]);

        for t in &nodes {
            let Some(g_out) = pending.remove(&t.id()) else {
                continue;
            };
            match &t.node.grad_fn {
                None => {
                    let mut slot = t.node.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g_out).for_each(|(a, g)| *a += g),
                        None => *slot = Some(g_out),
                    }
                }
                Some(gf) => {
                    let out = t.node.data.borrow();
                    let grads = (gf.backward)(&g_out, &out);
                    debug_assert_eq!(grads.len(), gf.parents.len(), "{}", gf.name);
                    for (p, g) in gf.parents.iter().zip(grads) {
                        let Some(g) = g else { continue };
                        if !p.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(g.len(), p.numel(), "{} parent grad", gf.name);
                        match pending.get_mut(&p.id()) {
                            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                            None => {
                                pending.insert(p.id(), g);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
