//! Sufficient stepsize conditions of each method.
//!
//! | method            | condition                                       |
//! |-------------------|-------------------------------------------------|
//! | C-V, TriPD        | `a b ||D^T D|| + a L / 2 < 1`                   |
//! | PD3O, PDFP, AFBA  | `0 < a < 2/L` and `a b ||D^T D|| < 1`           |
//! | BALPA             | `0 < a < 2/L`, `gamma > 0`                      |

use super::step::SolverKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub satisfied: bool,
    /// Signed slack of the binding constraint, written as `1 - lhs` for the
    /// normalized inequality `lhs < 1`; positive exactly when satisfied.
    pub margin: f64,
    pub binding: &'static str,
}

impl Verdict {
    fn from_slacks(slacks: &[(f64, &'static str)]) -> Self {
        let (margin, binding) = slacks.iter().copied().fold((f64::INFINITY, ""), |best, s| {
            if s.0 < best.0 || s.0.is_nan() {
                s
            } else {
                best
            }
        });
        Verdict { satisfied: margin > 0.0, margin, binding }
    }
}

pub fn check_stepsize(
    kind: SolverKind,
    alpha: f64,
    beta: Option<f64>,
    gamma: Option<f64>,
    lipschitz: f64,
    norm_dd: f64,
) -> Verdict {
    if !(alpha > 0.0) {
        return Verdict { satisfied: false, margin: alpha, binding: "alpha > 0" };
    }
    let half_al = 1.0 - alpha * lipschitz / 2.0;
    match kind {
        SolverKind::Balpa => match gamma {
            Some(g) if g > 0.0 => Verdict::from_slacks(&[(half_al, "alpha < 2/L")]),
            Some(g) => Verdict { satisfied: false, margin: g, binding: "gamma > 0" },
            None => Verdict { satisfied: false, margin: f64::NEG_INFINITY, binding: "gamma required" },
        },
        _ => {
            let b = match beta {
                Some(b) if b > 0.0 => b,
                Some(b) => return Verdict { satisfied: false, margin: b, binding: "beta > 0" },
                None => return Verdict { satisfied: false, margin: f64::NEG_INFINITY, binding: "beta required" },
            };
            let abn = alpha * b * norm_dd;
            match kind {
                SolverKind::CondatVu | SolverKind::TriPd => Verdict::from_slacks(&[(
                    1.0 - abn - alpha * lipschitz / 2.0,
                    "alpha*beta*||D^T D|| + alpha*L/2 < 1",
                )]),
                _ => Verdict::from_slacks(&[(half_al, "alpha < 2/L"), (1.0 - abn, "alpha*beta*||D^T D|| < 1")]),
            }
        }
    }
}

/// True when `alpha L < 1`, the regime in which the ergodic gap bound holds
/// (non-ergodic convergence only needs `alpha L < 2`).
pub fn ergodic_regime(alpha: f64, lipschitz: f64) -> bool {
    alpha * lipschitz < 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balpa_ignores_operator_norm() {
        for ndd in [0.0, 1.0, 1e3, 1e12] {
            assert!(check_stepsize(SolverKind::Balpa, 1.9 / 4.0, None, Some(1.0), 4.0, ndd).satisfied);
        }
    }

    #[test]
    fn condat_vu_large_norm() {
        let v = check_stepsize(SolverKind::CondatVu, 1.0, Some(1.0), None, 1.0, 1e6);
        assert!(!v.satisfied);
        assert!(v.margin < -9e5);
    }

    #[test]
    fn pd3o_boundary_is_strict() {
        let v = check_stepsize(SolverKind::Pd3o, 2.0, Some(1e-9), None, 1.0, 1.0);
        assert!(!v.satisfied);
        assert_eq!(v.margin, 0.0);
        assert_eq!(v.binding, "alpha < 2/L");
    }

    #[test]
    fn binding_constraint_is_reported() {
        let v = check_stepsize(SolverKind::Afba, 0.5, Some(1.5), None, 1.0, 2.0);
        assert_eq!(v.binding, "alpha*beta*||D^T D|| < 1");
        assert!((v.margin + 0.5).abs() < 1e-15);
    }
}
