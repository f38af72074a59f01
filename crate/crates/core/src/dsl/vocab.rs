use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::token::{BinaryOp, Constant, Operand, UnaryOp};
use super::DslError;

/// Largest integer constant (and reciprocal denominator) the language admits.
pub const MAX_CONSTANT: u32 = 100;

/// Which tokens a run may use. Order is significant: it fixes the meaning
/// of every action index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularyConfig {
    /// Symbolic operands, any of `u`, `x`, `t`.
    pub operands: Vec<String>,
    /// Integer constants `c`.
    pub integers: Vec<u32>,
    /// Denominators of the reciprocal constants `1/c`.
    pub reciprocals: Vec<u32>,
    pub unaries: Vec<String>,
    pub binaries: Vec<String>,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        Self {
            operands: vec!["u".into(), "x".into(), "t".into()],
            integers: (1..=MAX_CONSTANT).collect(),
            reciprocals: (1..=MAX_CONSTANT).collect(),
            unaries: UnaryOp::ALL.iter().map(|op| op.name().to_string()).collect(),
            binaries: BinaryOp::ALL.iter().map(|op| op.name().to_string()).collect(),
        }
    }
}

/// The token sets of the expression language.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    operands: Vec<Operand>,
    unaries: Vec<UnaryOp>,
    binaries: Vec<BinaryOp>,
}

fn check_unique<T: Eq + Hash + std::fmt::Debug>(items: &[T], group: &str) -> Result<(), DslError> {
    let mut seen = HashSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(DslError::Config(format!("duplicate {group} token {item:?}")));
        }
    }
    Ok(())
}

pub fn build_vocabulary(config: &VocabularyConfig) -> Result<Vocabulary, DslError> {
    let mut operands = Vec::new();
    for name in &config.operands {
        operands.push(match name.as_str() {
            "u" => Operand::U,
            "x" => Operand::X,
            "t" => Operand::T,
            other => return Err(DslError::UnknownToken(other.to_string())),
        });
    }
    for (list, make) in [
        (&config.integers, Constant::Integer as fn(u32) -> Constant),
        (&config.reciprocals, Constant::Reciprocal as fn(u32) -> Constant),
    ] {
        for &c in list {
            if !(1..=MAX_CONSTANT).contains(&c) {
                return Err(DslError::Config(format!(
                    "constant {c} outside 1..={MAX_CONSTANT}"
                )));
            }
            operands.push(Operand::Const(make(c)));
        }
    }
    let unaries = config
        .unaries
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<UnaryOp>, _>>()?;
    let binaries = config
        .binaries
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<BinaryOp>, _>>()?;
    Vocabulary::new(operands, unaries, binaries)
}

impl Vocabulary {
    pub fn new(
        operands: Vec<Operand>,
        unaries: Vec<UnaryOp>,
        binaries: Vec<BinaryOp>,
    ) -> Result<Self, DslError> {
        for (len, group) in [
            (operands.len(), "operand"),
            (unaries.len(), "unary"),
            (binaries.len(), "binary"),
        ] {
            if len == 0 {
                return Err(DslError::Config(format!("{group} group is empty")));
            }
        }
        check_unique(&operands, "operand")?;
        check_unique(&unaries, "unary")?;
        check_unique(&binaries, "binary")?;
        Ok(Self {
            operands,
            unaries,
            binaries,
        })
    }

    /// All operand tokens, symbolic operands first, then constants.
    pub fn operands(&self) -> &[Operand] {
        &self.operands
    }

    pub fn unaries(&self) -> &[UnaryOp] {
        &self.unaries
    }

    pub fn binaries(&self) -> &[BinaryOp] {
        &self.binaries
    }

    pub fn symbolic_operands(&self) -> Vec<Operand> {
        self.operands.iter().copied().filter(|o| !o.is_const()).collect()
    }

    pub fn constants(&self) -> Vec<Constant> {
        self.operands
            .iter()
            .filter_map(|o| match o {
                Operand::Const(c) => Some(*c),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vocabulary_is_full_language() {
        let v = build_vocabulary(&VocabularyConfig::default()).unwrap();
        assert_eq!(v.operands().len(), 203);
        assert_eq!(&v.operands()[..3], &[Operand::U, Operand::X, Operand::T]);
        assert_eq!(v.operands()[3], Operand::Const(Constant::Integer(1)));
        assert_eq!(v.operands()[202], Operand::Const(Constant::Reciprocal(100)));
        assert_eq!(v.unaries(), &UnaryOp::ALL);
        assert_eq!(v.binaries(), &BinaryOp::ALL);
    }

    #[test]
    fn restricted_constants() {
        let cfg = VocabularyConfig {
            integers: vec![2],
            reciprocals: vec![2],
            ..Default::default()
        };
        let v = build_vocabulary(&cfg).unwrap();
        assert_eq!(
            v.operands(),
            &[
                Operand::U,
                Operand::X,
                Operand::T,
                Operand::Const(Constant::Integer(2)),
                Operand::Const(Constant::Reciprocal(2)),
            ]
        );
    }

    #[test]
    fn empty_or_bad_groups_are_rejected() {
        let no_binaries = VocabularyConfig {
            binaries: vec![],
            ..Default::default()
        };
        assert!(matches!(build_vocabulary(&no_binaries), Err(DslError::Config(_))));

        let no_operands = VocabularyConfig {
            operands: vec![],
            integers: vec![],
            reciprocals: vec![],
            ..Default::default()
        };
        assert!(build_vocabulary(&no_operands).is_err());

        let dup = VocabularyConfig {
            unaries: vec!["sin".into(), "sin".into()],
            ..Default::default()
        };
        assert!(build_vocabulary(&dup).is_err());

        let zero = VocabularyConfig {
            reciprocals: vec![0],
            ..Default::default()
        };
        assert!(build_vocabulary(&zero).is_err());

        let unknown = VocabularyConfig {
            operands: vec!["y".into()],
            ..Default::default()
        };
        assert!(matches!(build_vocabulary(&unknown), Err(DslError::UnknownToken(_))));
    }
}
