use std::cell::{Cell, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use super::Scalar;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Gradient rule for one recorded op: maps the upstream gradient to one
/// optional gradient per parent, in parent order.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T]) -> Vec<Option<Vec<T>>>>;

struct GraphLink<T: Scalar> {
    op: &'static str,
    parents: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Node<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    link: Option<GraphLink<T>>,
}

/// Dense row-major array that may carry a reverse-mode graph backlink.
///
/// Values are immutable once created. Cloning is cheap (reference counted).
pub struct Tensor<T: Scalar = f32>(Rc<Node<T>>);

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor(Rc::clone(&self.0))
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.0.link.as_ref().map(|l| l.op))
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    fn from_node(shape: Vec<usize>, data: Vec<T>, requires_grad: bool, link: Option<GraphLink<T>>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            link,
        }))
    }

    /// Constant tensor; never receives a gradient.
    pub fn new(shape: &[usize], data: Vec<T>) -> Self {
        Self::from_node(shape.to_vec(), data, false, None)
    }

    /// Leaf tensor whose gradient is retained after `backward`.
    pub fn leaf(shape: &[usize], data: Vec<T>) -> Self {
        Self::from_node(shape.to_vec(), data, true, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(shape, vec![T::zero(); shape.iter().product()])
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::new(shape, vec![value; shape.iter().product()])
    }

    pub fn scalar(value: T) -> Self {
        Self::new(&[1], vec![value])
    }

    /// Result of an op. Records the backward rule only when some parent
    /// participates in differentiation.
    pub(crate) fn from_op(
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<T>,
        parents: Vec<Tensor<T>>,
        backward: impl Fn(&[T]) -> Vec<Option<Vec<T>>> + 'static,
    ) -> Self {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let link = requires_grad.then(|| GraphLink {
            op,
            parents,
            backward: Box::new(backward),
        });
        Self::from_node(shape, data, requires_grad, link)
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn data(&self) -> &[T] {
        &self.0.data
    }

    pub fn len(&self) -> usize {
        self.0.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.data.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Name of the producing op, if this tensor is part of a graph.
    pub fn op(&self) -> Option<&'static str> {
        self.0.link.as_ref().map(|l| l.op)
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.0.grad.borrow().clone()
    }

    pub fn item(&self) -> T {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape());
        self.0.data[0]
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.0.data.clone()
    }

    /// Same values, detached from any graph.
    pub fn detach(&self) -> Self {
        Self::new(self.shape(), self.to_vec())
    }

    /// Reverse-mode sweep from a scalar. Gradients are stored on leaves.
    pub fn backward(&self) {
        assert_eq!(self.len(), 1, "backward() expects a scalar, got shape {:?}", self.shape());
        self.backward_with(vec![T::one()]);
    }

    /// Reverse-mode sweep seeded with an explicit upstream gradient.
    pub fn backward_with(&self, seed: Vec<T>) {
        assert_eq!(seed.len(), self.len());
        if !self.requires_grad() {
            return;
        }

        // Parents always carry smaller ids than their children, so a
        // descending id order is a valid reverse topological order.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut seen: HashSet<u64> = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.0.id) {
                continue;
            }
            if let Some(link) = &t.0.link {
                for p in &link.parents {
                    if p.requires_grad() && !seen.contains(&p.0.id) {
                        stack.push(p.clone());
                    }
                }
            }
            order.push(t);
        }
        order.sort_by(|a, b| b.0.id.cmp(&a.0.id));

        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.0.id, seed);
        for t in order {
            let Some(g) = grads.remove(&t.0.id) else {
                continue;
            };
            match &t.0.link {
                Some(link) => {
                    let parent_grads = (link.backward)(&g);
                    debug_assert_eq!(parent_grads.len(), link.parents.len(), "op {}", link.op);
                    for (p, pg) in link.parents.iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !p.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), p.len(), "op {} gradient size", link.op);
                        match grads.get_mut(&p.0.id) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a = *a + *b),
                            None => {
                                grads.insert(p.0.id, pg);
                            }
                        }
                    }
                }
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                        None => *slot = Some(g),
                    }
                }
            }
        }
    }
}
