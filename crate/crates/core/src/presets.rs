//! The four scan cases and the seven λ-lines of the unit square.

use crate::afcore::{validate_embedding, AlgebraProfile, EmbeddingSpec};
use crate::ssbm::PathSpec;
use crate::{Error, Result};

pub const CASE_NAMES: [&str; 4] = ["case1", "case2", "case3", "case4"];

/// `(source dims, target dims, multiplicity matrix)`.
pub type CaseLayout = (Vec<usize>, Vec<usize>, Vec<Vec<usize>>);

pub fn case_layout(name: &str) -> Result<CaseLayout> {
    match name {
        "case1" => Ok((vec![2], vec![3], vec![vec![1]])),
        "case2" => Ok((vec![2, 2], vec![4], vec![vec![1, 1]])),
        "case3" => Ok((vec![2, 2], vec![5], vec![vec![1, 1]])),
        "case4" => Ok((vec![2, 3], vec![5], vec![vec![1, 1]])),
        other => Err(Error::InvalidArgument(format!(
            "unknown preset '{other}', expected one of {}",
            CASE_NAMES.join(", ")
        ))),
    }
}

pub fn case_spec(name: &str) -> Result<EmbeddingSpec> {
    let (src, tgt, mult) = case_layout(name)?;
    validate_embedding(AlgebraProfile::new(src)?, AlgebraProfile::new(tgt)?, mult)
}

/// Diagonal `λ_i = t`, `t ∈ [−1, 3]`.
pub fn default_diagonal(samples: usize) -> PathSpec {
    PathSpec::Diagonal {
        from: -1.0,
        to: 3.0,
        samples,
    }
}

/// Edges of `[0,1]²`, both diagonals, and the anti-diagonal `λ₁ + λ₂ = 0.5`.
///
/// Endpoints are an interpretation; the lines are not specified beyond this.
pub fn seven_lines(samples: usize) -> Vec<(&'static str, PathSpec)> {
    let seg = |a: [f64; 2], b: [f64; 2]| PathSpec::Segment {
        start: a.to_vec(),
        end: b.to_vec(),
        samples,
    };
    vec![
        ("edge-l2=0", seg([0.0, 0.0], [1.0, 0.0])),
        ("edge-l1=1", seg([1.0, 0.0], [1.0, 1.0])),
        ("edge-l2=1", seg([0.0, 1.0], [1.0, 1.0])),
        ("edge-l1=0", seg([0.0, 0.0], [0.0, 1.0])),
        (
            "diagonal",
            PathSpec::Diagonal {
                from: 0.0,
                to: 1.0,
                samples,
            },
        ),
        ("anti-diagonal-1", seg([1.0, 0.0], [0.0, 1.0])),
        (
            "anti-diagonal-0.5",
            PathSpec::AntiDiagonal {
                c: 0.5,
                from: 0.0,
                to: 0.5,
                samples,
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_cases_validate() {
        let pads: Vec<usize> = CASE_NAMES
            .iter()
            .map(|c| case_spec(c).unwrap().pad()[0])
            .collect();
        assert_eq!(pads, vec![1, 0, 1, 0]);
        assert!(case_spec("case5").is_err());
    }

    #[test]
    fn seven_lines_are_two_dimensional() {
        let lines = seven_lines(11);
        assert_eq!(lines.len(), 7);
        for (_, p) in lines {
            assert_eq!(p.points(2).unwrap().len(), 11);
        }
    }
}
