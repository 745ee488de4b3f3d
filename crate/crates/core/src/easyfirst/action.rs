use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `p_i` becomes a left dependent of `p_{i+1}`.
    Left,
    /// `p_{i+1}` becomes a right dependent of `p_i`.
    Right,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Left, Direction::Right];

    pub fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "LEFT" => Some(Direction::Left),
            "RIGHT" => Some(Direction::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Left => "LEFT",
            Direction::Right => "RIGHT",
        })
    }
}

/// An attachment between pending items `position` and `position + 1`
/// (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub position: usize,
    pub direction: Direction,
    pub relation: usize,
}

impl Action {
    pub fn new(position: usize, direction: Direction, relation: usize) -> Self {
        Action {
            position,
            direction,
            relation,
        }
    }

    /// Index in the canonical order: position, then direction, then relation.
    pub fn canonical_index(&self, relations: usize) -> usize {
        ((self.position - 1) * 2 + self.direction.index()) * relations + self.relation
    }

    /// Inverse of [`Action::canonical_index`].
    pub fn from_canonical(index: usize, relations: usize) -> Self {
        let relation = index % relations;
        let rest = index / relations;
        Action {
            position: rest / 2 + 1,
            direction: Direction::ALL[rest % 2],
            relation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredAction {
    pub action: Action,
    pub score: f64,
}

/// Number of actions on a pending list of size `n`: `2R(n - 1)`.
pub fn action_count(n: usize, relations: usize) -> usize {
    2 * relations * n.saturating_sub(1)
}

/// All actions for a pending list of size `n` in canonical order.
pub fn enumerate_actions(n: usize, relations: usize) -> Result<Vec<Action>, super::ParseError> {
    if n < 2 {
        return Err(super::ParseError::Complete);
    }
    if relations == 0 {
        return Err(super::ParseError::NoRelations);
    }
    Ok((0..action_count(n, relations))
        .map(|k| Action::from_canonical(k, relations))
        .collect())
}

/// Index of the first maximum, so ties resolve to the canonical order.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| s > scores[b]) {
            best = Some(k);
        }
    }
    best
}
