//! Reverse-mode automatic differentiation over flat n-dimensional arrays.
//!
//! A [`Tape`] records one op node per produced [`DiffArray`]; nodes hold a
//! backward closure that maps the output gradient to input-gradient
//! contributions. Gradients accumulate (+=) across fan-out, and one call to
//! [`DiffArray::backward`] consumes the tape, so each training phase builds
//! a fresh tape.
//!
//! Contract violations (shape mismatches, non-scalar backward roots,
//! log of a nonpositive value) panic with a message naming the offending
//! dimension; they are programming errors, not runtime conditions.

mod conv;
mod gradcheck;
mod ops;
mod spectral;

pub use gradcheck::check_gradients;
pub use spectral::{frame_count, hann_window};
pub(crate) use ops::reflect_index;

use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

use crate::scalar::Scalar;

/// Gradient accumulator indexed by tape node id.
pub struct GradStore<T> {
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> GradStore<T> {
    fn new(len: usize) -> Self {
        let mut slots = Vec::with_capacity(len);
        slots.resize_with(len, || None);
        GradStore { slots }
    }

    /// Mutable zero-initialized gradient slot for node `id`.
    pub fn slot(&mut self, id: usize, numel: usize) -> &mut [T] {
        let entry = &mut self.slots[id];
        if entry.is_none() {
            *entry = Some(vec![T::zero(); numel]);
        }
        entry.as_mut().unwrap()
    }

    fn take(&mut self, id: usize) -> Option<Vec<T>> {
        self.slots[id].take()
    }
}

type BackwardFn<T> = Box<dyn Fn(&[T], &mut GradStore<T>)>;

struct Node<T> {
    numel: usize,
    /// Keep this node's gradient after backward (watched leaves).
    retain: bool,
    /// None for leaves and constants promoted onto the tape.
    backward: Option<BackwardFn<T>>,
}

struct TapeInner<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

/// Shared recording tape. Cheap to clone; single-threaded by construction.
pub struct Tape<T> {
    inner: Rc<RefCell<TapeInner<T>>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                consumed: false,
            })),
        }
    }

    fn push(&self, numel: usize, retain: bool, backward: Option<BackwardFn<T>>) -> usize {
        let mut inner = self.inner.borrow_mut();
        assert!(
            !inner.consumed,
            "tape already consumed by backward; build a fresh tape per step"
        );
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            numel,
            retain,
            backward,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn same_tape(&self, other: &Tape<T>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

impl<T> Clone for Tape<T> {
    fn clone(&self) -> Self {
        Tape {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// n-dimensional numeric array, optionally attached to a gradient tape.
///
/// `values` are row-major; `product(shape) == values.len()` always holds.
/// Constants carry no tape handle; op results are recorded whenever any
/// input is.
pub struct DiffArray<T> {
    shape: Vec<usize>,
    values: Arc<Vec<T>>,
    node: Option<(Tape<T>, usize)>,
    requires_grad: bool,
}

impl<T: Scalar> Clone for DiffArray<T> {
    fn clone(&self) -> Self {
        DiffArray {
            shape: self.shape.clone(),
            values: Arc::clone(&self.values),
            node: self.node.as_ref().map(|(t, id)| (t.clone(), *id)),
            requires_grad: self.requires_grad,
        }
    }
}

impl<T: Scalar> DiffArray<T> {
    /// Constant array: participates in math but never in gradients.
    pub fn constant(values: Vec<T>, shape: &[usize]) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape {:?} does not match {} values",
            shape,
            values.len()
        );
        DiffArray {
            shape: shape.to_vec(),
            values: Arc::new(values),
            node: None,
            requires_grad: false,
        }
    }

    pub fn scalar(value: T) -> Self {
        Self::constant(vec![value], &[1])
    }

    /// Leaf registered on `tape`; its gradient is retained by `backward`.
    pub fn watched(tape: &Tape<T>, values: Vec<T>, shape: &[usize]) -> Self {
        Self::watched_arc(tape, Arc::new(values), shape)
    }

    /// Watched leaf sharing an existing value buffer (parameter binding).
    pub fn watched_arc(tape: &Tape<T>, values: Arc<Vec<T>>, shape: &[usize]) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape {:?} does not match {} values",
            shape,
            values.len()
        );
        let id = tape.push(values.len(), true, None);
        DiffArray {
            shape: shape.to_vec(),
            values,
            node: Some((tape.clone(), id)),
            requires_grad: true,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn node_id(&self) -> Option<usize> {
        self.node.as_ref().map(|(_, id)| *id)
    }

    /// Scalar value; panics unless the array has exactly one element.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on shape {:?}", self.shape);
        self.values[0]
    }

    /// Same values, severed from the tape.
    pub fn detach(&self) -> Self {
        DiffArray {
            shape: self.shape.clone(),
            values: Arc::clone(&self.values),
            node: None,
            requires_grad: false,
        }
    }

    /// The tape shared by `inputs`, if any input is attached.
    /// Panics if two inputs live on different tapes.
    fn joint_tape(inputs: &[&DiffArray<T>]) -> Option<Tape<T>> {
        let mut found: Option<Tape<T>> = None;
        for input in inputs {
            if let Some((tape, _)) = &input.node {
                match &found {
                    None => found = Some(tape.clone()),
                    Some(existing) => {
                        assert!(existing.same_tape(tape), "inputs recorded on different tapes")
                    }
                }
            }
        }
        found
    }

    /// Record the result of an op over `inputs`. `make_backward` receives the
    /// per-input node ids (None for constants) and returns the VJP closure.
    fn record(
        inputs: &[&DiffArray<T>],
        values: Vec<T>,
        shape: Vec<usize>,
        make_backward: impl FnOnce(Vec<Option<usize>>) -> BackwardFn<T>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        match Self::joint_tape(inputs) {
            None => DiffArray {
                shape,
                values: Arc::new(values),
                node: None,
                requires_grad: false,
            },
            Some(tape) => {
                let ids: Vec<Option<usize>> = inputs.iter().map(|a| a.node_id()).collect();
                let backward = make_backward(ids);
                let id = tape.push(values.len(), false, Some(backward));
                DiffArray {
                    shape,
                    values: Arc::new(values),
                    node: Some((tape, id)),
                    requires_grad: true,
                }
            }
        }
    }

    /// Reverse pass from a scalar root. Consumes the tape contents and
    /// returns retained leaf gradients; repeated runs on fresh tapes are
    /// bitwise deterministic.
    pub fn backward(&self) -> Gradients<T> {
        assert_eq!(
            self.numel(),
            1,
            "backward root must be scalar, got shape {:?}",
            self.shape
        );
        let Some((tape, root_id)) = &self.node else {
            // Constant root: nothing depends on any leaf.
            return Gradients { slots: Vec::new() };
        };
        let nodes = {
            let mut inner = tape.inner.borrow_mut();
            assert!(!inner.consumed, "tape already consumed by backward");
            inner.consumed = true;
            std::mem::take(&mut inner.nodes)
        };
        let mut store = GradStore::new(nodes.len());
        store.slot(*root_id, 1)[0] = T::one();
        for id in (0..=*root_id).rev() {
            let Some(grad) = store.take(id) else {
                continue;
            };
            debug_assert_eq!(grad.len(), nodes[id].numel);
            if let Some(backward) = &nodes[id].backward {
                backward(&grad, &mut store);
            }
            if nodes[id].retain {
                store.slots[id] = Some(grad);
            }
        }
        Gradients { slots: store.slots }
    }
}

/// Leaf gradients produced by [`DiffArray::backward`].
pub struct Gradients<T> {
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient w.r.t. `leaf`, or None when no gradient flowed to it
    /// (mathematically zero).
    pub fn wrt(&self, leaf: &DiffArray<T>) -> Option<&[T]> {
        let id = leaf.node_id()?;
        self.slots.get(id).and_then(|slot| slot.as_deref())
    }

    /// Gradient w.r.t. `leaf`, materializing zeros when none flowed.
    pub fn wrt_or_zeros(&self, leaf: &DiffArray<T>) -> Vec<T> {
        self.wrt(leaf)
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![T::zero(); leaf.numel()])
    }
}
