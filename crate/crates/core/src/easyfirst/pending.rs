use super::{Action, Direction, ParseError};

/// A labeled arc between 1-based token positions; head 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arc {
    pub head: usize,
    pub dependent: usize,
    pub relation: usize,
}

/// One partial structure on the pending list.
#[derive(Debug, Clone)]
pub struct PendingItem<T> {
    /// 1-based sentence position of the head word.
    pub head: usize,
    /// Left dependents, nearest first.
    pub left_children: Vec<usize>,
    /// Right dependents, nearest first.
    pub right_children: Vec<usize>,
    /// Number of attachments received; identifies the item's current state.
    pub version: u32,
    pub payload: T,
}

/// The pending list together with the arcs built so far.
#[derive(Debug, Clone)]
pub struct Pending<T> {
    items: Vec<PendingItem<T>>,
    arcs: Vec<Arc>,
}

impl<T> Pending<T> {
    /// One item per word, in sentence order.
    pub fn new(payloads: Vec<T>) -> Result<Self, ParseError> {
        if payloads.is_empty() {
            return Err(ParseError::EmptySentence);
        }
        let items = payloads
            .into_iter()
            .enumerate()
            .map(|(k, payload)| PendingItem {
                head: k + 1,
                left_children: Vec::new(),
                right_children: Vec::new(),
                version: 0,
                payload,
            })
            .collect();
        Ok(Pending {
            items,
            arcs: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[PendingItem<T>] {
        &self.items
    }

    /// Item `p_i` (1-based).
    pub fn item(&self, i: usize) -> &PendingItem<T> {
        &self.items[i - 1]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// `(head, dependent)` sentence positions an action would connect.
    pub fn endpoints(&self, action: &Action) -> Result<(usize, usize), ParseError> {
        if action.position == 0 || action.position >= self.items.len() {
            return Err(ParseError::InvalidPosition {
                position: action.position,
                pending: self.items.len(),
            });
        }
        let left = self.items[action.position - 1].head;
        let right = self.items[action.position].head;
        Ok(match action.direction {
            Direction::Left => (right, left),
            Direction::Right => (left, right),
        })
    }

    /// Applies `action`: records the arc, hands the removed dependent's
    /// payload to `attach(receiver, dependent, direction, relation)`, and
    /// drops the dependent from the list.
    pub fn apply<F>(&mut self, action: &Action, attach: F) -> Result<&Arc, ParseError>
    where
        F: FnOnce(&mut T, T, Direction, usize) -> Result<(), ParseError>,
    {
        let (head, dependent) = self.endpoints(action)?;
        let (receiver, removed) = match action.direction {
            Direction::Left => (action.position, action.position - 1),
            Direction::Right => (action.position - 1, action.position),
        };
        let child = self.items.remove(removed);
        let receiver = &mut self.items[if removed < receiver { receiver - 1 } else { receiver }];
        attach(&mut receiver.payload, child.payload, action.direction, action.relation)?;
        match action.direction {
            Direction::Left => receiver.left_children.push(dependent),
            Direction::Right => receiver.right_children.push(dependent),
        }
        receiver.version += 1;
        self.arcs.push(Arc {
            head,
            dependent,
            relation: action.relation,
        });
        Ok(self.arcs.last().expect("just pushed"))
    }

    /// Attaches the single surviving item to the root.
    pub fn finish(mut self, root_relation: usize) -> Result<Vec<Arc>, ParseError> {
        if self.items.len() != 1 {
            return Err(ParseError::Incomplete(self.items.len()));
        }
        self.arcs.push(Arc {
            head: 0,
            dependent: self.items[0].head,
            relation: root_relation,
        });
        Ok(self.arcs)
    }
}

/// Head vector (`heads[i]` for token `i + 1`) of a complete arc list.
pub fn arcs_to_heads(n: usize, arcs: &[Arc]) -> Vec<usize> {
    let mut heads = vec![0; n];
    for arc in arcs {
        heads[arc.dependent - 1] = arc.head;
    }
    heads
}
