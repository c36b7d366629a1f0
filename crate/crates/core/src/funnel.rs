//! Per-function rejection-sampling ledger: candidate counts across the
//! generate/filter stages and the candidate status machine.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::ast::UnitId;

/// Candidate lifecycle. Status only advances along this order; `Rejected` is
/// terminal and keeps the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CandidateStatus {
    Sampled,
    Compiled,
    ArgsOk,
    Equivalent,
    Rejected { reason: String },
}

impl CandidateStatus {
    pub fn order(&self) -> u8 {
        match self {
            CandidateStatus::Sampled => 0,
            CandidateStatus::Compiled => 1,
            CandidateStatus::ArgsOk => 2,
            CandidateStatus::Equivalent => 3,
            CandidateStatus::Rejected { .. } => u8::MAX,
        }
    }

    /// Legal transition: forward along the ladder, or into `Rejected` from
    /// any non-terminal state.
    pub fn can_advance_to(&self, next: &CandidateStatus) -> bool {
        match (self, next) {
            (CandidateStatus::Rejected { .. }, _) => false,
            (_, CandidateStatus::Rejected { .. }) => true,
            (a, b) => b.order() == a.order() + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Committed,
    Failed,
}

/// Rejection-sampling counts for one unit:
/// sampled N -> compiling N' -> requested pairs M = N'xK -> valid pairs M'
/// -> requested tests S = M'xK -> passing triples S'.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelState {
    pub unit_id: UnitId,
    pub n: u64,
    pub n_prime: u64,
    pub m: u64,
    pub m_prime: u64,
    pub s: u64,
    pub s_prime: u64,
    pub round: u32,
    pub terminal: Option<Terminal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunnelViolation(pub String);

impl core::fmt::Display for FunnelViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "funnel invariant violated: {}", self.0)
    }
}

impl FunnelState {
    pub fn new(unit_id: UnitId) -> FunnelState {
        FunnelState {
            unit_id,
            n: 0,
            n_prime: 0,
            m: 0,
            m_prime: 0,
            s: 0,
            s_prime: 0,
            round: 0,
            terminal: None,
        }
    }

    /// Check the funnel inequalities; `k` is the per-stage sampling width
    /// the run was configured with.
    pub fn check(&self, k: u64) -> Result<(), FunnelViolation> {
        let err = |m: String| Err(FunnelViolation(m));
        if self.n_prime > self.n {
            return err(alloc::format!("N'={} > N={}", self.n_prime, self.n));
        }
        if self.m != self.n_prime * k {
            return err(alloc::format!(
                "M={} != N'xK={}x{}",
                self.m,
                self.n_prime,
                k
            ));
        }
        if self.m_prime > self.m {
            return err(alloc::format!("M'={} > M={}", self.m_prime, self.m));
        }
        if self.s != self.m_prime * k {
            return err(alloc::format!(
                "S={} != M'xK={}x{}",
                self.s,
                self.m_prime,
                k
            ));
        }
        if self.s_prime > self.s {
            return err(alloc::format!("S'={} > S={}", self.s_prime, self.s));
        }
        if self.terminal == Some(Terminal::Committed) && self.s_prime == 0 {
            return err(alloc::format!("committed with S'=0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::UnitKind;

    #[test]
    fn status_ladder() {
        use CandidateStatus::*;
        assert!(Sampled.can_advance_to(&Compiled));
        assert!(Compiled.can_advance_to(&ArgsOk));
        assert!(ArgsOk.can_advance_to(&Equivalent));
        assert!(!Sampled.can_advance_to(&ArgsOk));
        assert!(Compiled.can_advance_to(&Rejected {
            reason: String::from("x")
        }));
        assert!(!Rejected {
            reason: String::from("x")
        }
        .can_advance_to(&Equivalent));
    }

    #[test]
    fn funnel_checks() {
        let mut f = FunnelState::new(UnitId::new(UnitKind::Function, "square"));
        f.n = 4;
        f.n_prime = 3;
        f.m = 6;
        f.m_prime = 5;
        f.s = 10;
        f.s_prime = 2;
        f.terminal = Some(Terminal::Committed);
        assert!(f.check(2).is_ok());
        f.n_prime = 5;
        assert!(f.check(2).is_err());
    }
}
