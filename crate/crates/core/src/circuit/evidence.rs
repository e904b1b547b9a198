use thiserror::Error;

/// Observation state of one binary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarState {
    Zero,
    One,
    Marginal,
}

impl VarState {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            VarState::Zero
        } else {
            VarState::One
        }
    }

    pub fn is_observed(self) -> bool {
        self != VarState::Marginal
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("variable {var} is observed as {left:?} and {right:?}")]
pub struct ConflictingEvidence {
    pub var: usize,
    pub left: VarState,
    pub right: VarState,
}

/// Partial assignment over all `n` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Evidence(Vec<VarState>);

impl Evidence {
    pub fn marginal(vars: usize) -> Self {
        Self(vec![VarState::Marginal; vars])
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| VarState::from_bit(b)).collect())
    }

    pub fn from_states(states: Vec<VarState>) -> Self {
        Self(states)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn states(&self) -> &[VarState] {
        &self.0
    }

    pub fn get(&self, var: usize) -> VarState {
        self.0[var]
    }

    pub fn set(&mut self, var: usize, state: VarState) {
        self.0[var] = state;
    }

    pub fn with(mut self, var: usize, state: VarState) -> Self {
        self.set(var, state);
        self
    }

    /// Observations of both; fails if a variable is observed with different values.
    pub fn union(&self, other: &Evidence) -> Result<Evidence, ConflictingEvidence> {
        assert_eq!(self.len(), other.len(), "evidence lengths differ");
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .map(|(var, (&a, &b))| match (a, b) {
                (VarState::Marginal, s) | (s, VarState::Marginal) => Ok(s),
                (a, b) if a == b => Ok(a),
                (left, right) => Err(ConflictingEvidence { var, left, right }),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Evidence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VarState::*;

    #[test]
    fn union_merges_and_detects_conflicts() {
        let a = Evidence::from_states(vec![Zero, Marginal, One]);
        let b = Evidence::from_states(vec![Marginal, One, One]);
        assert_eq!(a.union(&b).unwrap().states(), &[Zero, One, One]);
        let c = Evidence::from_states(vec![One, Marginal, Marginal]);
        assert_eq!(
            a.union(&c).unwrap_err(),
            ConflictingEvidence {
                var: 0,
                left: Zero,
                right: One
            }
        );
    }
}
