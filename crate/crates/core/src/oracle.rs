//! Dynamic oracle over the easy-first pending list.

use crate::easyfirst::{action_count, Action, Arc, Pending};

/// Gold structure plus the bookkeeping needed to judge actions after any
/// sequence of earlier actions, including wrong ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleState {
    /// Gold head per token, index 0 unused.
    heads: Vec<usize>,
    relations: Vec<usize>,
    /// Gold children of each token still on the pending list.
    remaining: Vec<usize>,
    in_pending: Vec<bool>,
}

impl OracleState {
    /// `heads[i]` and `relations[i]` describe token `i + 1`.
    pub fn new(heads: &[usize], relations: &[usize]) -> Self {
        assert_eq!(heads.len(), relations.len(), "one relation per head");
        let n = heads.len();
        let mut remaining = vec![0; n + 1];
        for &h in heads {
            if h != 0 {
                remaining[h] += 1;
            }
        }
        let mut in_pending = vec![true; n + 1];
        in_pending[0] = false;
        OracleState {
            heads: std::iter::once(0).chain(heads.iter().copied()).collect(),
            relations: std::iter::once(0).chain(relations.iter().copied()).collect(),
            remaining,
            in_pending,
        }
    }

    pub fn len(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gold children of `token` not yet removed from pending.
    pub fn remaining_children(&self, token: usize) -> usize {
        self.remaining[token]
    }

    /// All gold children of `token` have left the pending list.
    pub fn is_complete(&self, token: usize) -> bool {
        self.remaining[token] == 0
    }

    /// The gold head of `token` is the root or has left the pending list.
    pub fn head_gone(&self, token: usize) -> bool {
        !self.in_pending[self.heads[token]]
    }

    /// An action is valid when its dependent is complete and either the
    /// proposed arc is the gold arc, or the gold head has already left the
    /// pending list and the relation is the gold relation.
    pub fn is_valid<T>(&self, pending: &Pending<T>, action: &Action) -> bool {
        let Ok((head, dep)) = pending.endpoints(action) else {
            return false;
        };
        if !self.is_complete(dep) || action.relation != self.relations[dep] {
            return false;
        }
        self.heads[dep] == head || self.head_gone(dep)
    }

    /// Validity of every action in canonical order.
    pub fn valid_mask<T>(&self, pending: &Pending<T>, relations: usize) -> Vec<bool> {
        (0..action_count(pending.len(), relations))
            .map(|k| self.is_valid(pending, &Action::from_canonical(k, relations)))
            .collect()
    }

    /// Updates counts after `arc` removed its dependent from pending.
    pub fn observe(&mut self, arc: &Arc) {
        let dep = arc.dependent;
        debug_assert!(self.in_pending[dep]);
        self.in_pending[dep] = false;
        let gold = self.heads[dep];
        if gold != 0 {
            self.remaining[gold] -= 1;
        }
    }
}
