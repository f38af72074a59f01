//! Fixed-length action encoding of expressions.
//!
//! An action is one index per slot. Slot 0 picks the number of additive terms
//! `k in 1..=n_max`; the decoded expression is the left-nested sum
//! `((T1 + T2) + ...) + Tk`. Every term is a complete binary tree of
//! `max_depth` levels laid out in heap order. Each node owns the slots
//!
//! ```text
//! unary, [kind], operand, [constant], [binary]
//! ```
//!
//! where `kind` (leaf or binary) and `binary` exist only above the last level
//! and `constant` only when the vocabulary has constants. A node decodes to
//! `unary(core)` with `core` either the chosen operand (the constant slot
//! resolves the `const` operand choice) or `binary(left child, right child)`.
//! Choosing the identity unary leaves `core` bare, which is how shallow trees
//! fit the fixed layout. Slots that the decoded tree never reads are free.
//!
//! With the vocabulary orderings fixed, the all-zeros action decodes to the
//! first unary applied to the first operand; for the default vocabulary that
//! is the bare leaf `u`.
//!
//! Two unaries in a row (for example `sin(d/dx(u))`) cannot be expressed.

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::token::{BinaryOp, Constant, Operand, UnaryOp};
use super::vocab::Vocabulary;
use super::DslError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRole {
    /// Number of terms (root slot) or leaf-versus-binary (tree nodes).
    PickArity,
    PickOperand,
    PickUnary,
    PickBinary,
    /// Value of a `const` operand.
    PickConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub role: SlotRole,
    pub choice_count: usize,
}

/// Structural limits of the template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateLimits {
    pub n_max: usize,
    pub max_depth: usize,
}

impl Default for TemplateLimits {
    fn default() -> Self {
        Self {
            n_max: 3,
            max_depth: 4,
        }
    }
}

const LEAF: usize = 0;
const BINARY: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
struct NodeSlots {
    unary: usize,
    kind: Option<usize>,
    operand: usize,
    constant: Option<usize>,
    binary: Option<usize>,
}

/// A decoded action together with the slots the decoder read.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub expr: Expr,
    pub used: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotTemplate {
    limits: TemplateLimits,
    slots: Vec<Slot>,
    nodes: Vec<NodeSlots>,
    symbolic: Vec<Operand>,
    constants: Vec<Constant>,
    unaries: Vec<UnaryOp>,
    binaries: Vec<BinaryOp>,
}

impl SlotTemplate {
    pub fn new(vocab: &Vocabulary, limits: TemplateLimits) -> Result<Self, DslError> {
        if limits.n_max == 0 || limits.max_depth == 0 {
            return Err(DslError::Config(
                "template needs n_max >= 1 and max_depth >= 1".into(),
            ));
        }
        if limits.max_depth > 16 {
            return Err(DslError::Config("max_depth above 16 is not supported".into()));
        }
        let symbolic = vocab.symbolic_operands();
        let constants = vocab.constants();
        let operand_choices = symbolic.len() + usize::from(!constants.is_empty());
        let per_term = (1usize << limits.max_depth) - 1;

        let mut slots = vec![Slot {
            role: SlotRole::PickArity,
            choice_count: limits.n_max,
        }];
        let mut push = |role, choice_count| {
            slots.push(Slot { role, choice_count });
            slots.len() - 1
        };
        let mut nodes = Vec::with_capacity(limits.n_max * per_term);
        for _term in 0..limits.n_max {
            for i in 0..per_term {
                let internal = level_of(i) + 1 < limits.max_depth;
                let unary = push(SlotRole::PickUnary, vocab.unaries().len());
                let kind = internal.then(|| push(SlotRole::PickArity, 2));
                let operand = push(SlotRole::PickOperand, operand_choices);
                let constant =
                    (!constants.is_empty()).then(|| push(SlotRole::PickConstant, constants.len()));
                let binary = internal.then(|| push(SlotRole::PickBinary, vocab.binaries().len()));
                nodes.push(NodeSlots {
                    unary,
                    kind,
                    operand,
                    constant,
                    binary,
                });
            }
        }
        Ok(Self {
            limits,
            slots,
            nodes,
            symbolic,
            constants,
            unaries: vocab.unaries().to_vec(),
            binaries: vocab.binaries().to_vec(),
        })
    }

    pub fn limits(&self) -> TemplateLimits {
        self.limits
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn choice_counts(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s.choice_count).collect()
    }

    /// Total number of distinct complete assignments, saturating at `u128::MAX`.
    pub fn assignment_count(&self) -> u128 {
        self.slots
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.choice_count as u128))
    }

    fn per_term(&self) -> usize {
        (1usize << self.limits.max_depth) - 1
    }

    fn check(&self, actions: &[usize]) -> Result<(), DslError> {
        if actions.len() != self.slots.len() {
            return Err(DslError::Decode(format!(
                "expected {} action indices, got {}",
                self.slots.len(),
                actions.len()
            )));
        }
        for (i, (&a, slot)) in actions.iter().zip(&self.slots).enumerate() {
            if a >= slot.choice_count {
                return Err(DslError::Decode(format!(
                    "index {a} out of range for slot {i} with {} choices",
                    slot.choice_count
                )));
            }
        }
        Ok(())
    }

    pub fn decode(&self, actions: &[usize]) -> Result<Expr, DslError> {
        Ok(self.decode_with_mask(actions)?.expr)
    }

    pub fn decode_with_mask(&self, actions: &[usize]) -> Result<Decoded, DslError> {
        self.check(actions)?;
        let mut used = vec![false; actions.len()];
        used[0] = true;
        let terms = actions[0] + 1;
        let mut expr = self.decode_node(actions, &mut used, 0, 0);
        for k in 1..terms {
            let term = self.decode_node(actions, &mut used, k, 0);
            expr = expr.add(term);
        }
        Ok(Decoded { expr, used })
    }

    fn decode_node(&self, a: &[usize], used: &mut [bool], term: usize, i: usize) -> Expr {
        let node = self.nodes[term * self.per_term() + i];
        used[node.unary] = true;
        let is_binary = match node.kind {
            Some(k) => {
                used[k] = true;
                a[k] == BINARY
            }
            None => false,
        };
        let core = if is_binary {
            let b = node.binary.expect("internal node has a binary slot");
            used[b] = true;
            let left = self.decode_node(a, used, term, 2 * i + 1);
            let right = self.decode_node(a, used, term, 2 * i + 2);
            Expr::binary(self.binaries[a[b]], left, right)
        } else {
            used[node.operand] = true;
            let pick = a[node.operand];
            if pick < self.symbolic.len() {
                Expr::Leaf(self.symbolic[pick])
            } else {
                let c = node.constant.expect("const choice implies a constant slot");
                used[c] = true;
                Expr::Leaf(Operand::Const(self.constants[a[c]]))
            }
        };
        Expr::unary(self.unaries[a[node.unary]], core)
    }

    /// Canonical action for `expr`: fewest terms first, free slots set to 0.
    ///
    /// Explicit identity nodes are elided before encoding.
    pub fn encode(&self, expr: &Expr) -> Result<Vec<usize>, DslError> {
        let expr = expr.without_identity();
        let mut last_err = None;
        for k in 1..=self.limits.n_max {
            let Some(terms) = split_terms(&expr, k) else {
                continue;
            };
            let mut actions = vec![0; self.slots.len()];
            actions[0] = k - 1;
            let ok = terms
                .iter()
                .enumerate()
                .try_for_each(|(t, term)| self.encode_node(term, t, 0, &mut actions));
            match ok {
                Ok(()) => return Ok(actions),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            DslError::Unrepresentable(format!("{expr} does not split into at most {} terms", self.limits.n_max))
        }))
    }

    fn encode_node(&self, e: &Expr, term: usize, i: usize, a: &mut [usize]) -> Result<(), DslError> {
        let node = self.nodes[term * self.per_term() + i];
        let (unary, core) = match e {
            Expr::Unary(_, inner) if matches!(**inner, Expr::Unary(..)) => {
                return Err(DslError::Unrepresentable(format!("nested unary in {e}")));
            }
            Expr::Unary(op, inner) => (*op, &**inner),
            _ => (UnaryOp::Identity, e),
        };
        a[node.unary] = index_of(&self.unaries, &unary)
            .ok_or_else(|| DslError::Unrepresentable(format!("{} not in vocabulary", unary.name())))?;
        match core {
            Expr::Leaf(o) => {
                if let Some(k) = node.kind {
                    a[k] = LEAF;
                }
                match o {
                    Operand::Const(c) => {
                        let slot = node
                            .constant
                            .ok_or_else(|| DslError::Unrepresentable(format!("constant {c} not in vocabulary")))?;
                        a[slot] = index_of(&self.constants, c)
                            .ok_or_else(|| DslError::Unrepresentable(format!("constant {c} not in vocabulary")))?;
                        a[node.operand] = self.symbolic.len();
                    }
                    o => {
                        a[node.operand] = index_of(&self.symbolic, o)
                            .ok_or_else(|| DslError::Unrepresentable(format!("operand {o} not in vocabulary")))?;
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                let (Some(k), Some(b)) = (node.kind, node.binary) else {
                    return Err(DslError::Unrepresentable(format!(
                        "{e} exceeds max_depth {}",
                        self.limits.max_depth
                    )));
                };
                a[k] = BINARY;
                a[b] = index_of(&self.binaries, op)
                    .ok_or_else(|| DslError::Unrepresentable(format!("{} not in vocabulary", op.name())))?;
                self.encode_node(l, term, 2 * i + 1, a)?;
                self.encode_node(r, term, 2 * i + 2, a)?;
            }
            Expr::Unary(..) => unreachable!("nested unary rejected above"),
        }
        Ok(())
    }

    /// Slots read when decoding `actions`.
    pub fn used_slots(&self, actions: &[usize]) -> Result<Vec<bool>, DslError> {
        Ok(self.decode_with_mask(actions)?.used)
    }

    /// Short human-readable description, for checkpoint headers and logs.
    pub fn describe(&self) -> TemplateDescription {
        TemplateDescription {
            n_max: self.limits.n_max,
            max_depth: self.limits.max_depth,
            slots: self.slots.clone(),
            operands: self.symbolic.iter().map(|o| o.to_string()).collect(),
            constants: self.constants.iter().map(|c| c.to_string()).collect(),
            unaries: self.unaries.iter().map(|u| u.name().to_string()).collect(),
            binaries: self.binaries.iter().map(|b| b.name().to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateDescription {
    pub n_max: usize,
    pub max_depth: usize,
    pub slots: Vec<Slot>,
    pub operands: Vec<String>,
    pub constants: Vec<String>,
    pub unaries: Vec<String>,
    pub binaries: Vec<String>,
}

fn level_of(heap_index: usize) -> usize {
    (usize::BITS - 1 - (heap_index + 1).leading_zeros()) as usize
}

fn index_of<T: PartialEq>(items: &[T], item: &T) -> Option<usize> {
    items.iter().position(|x| x == item)
}

/// Peels `k - 1` left-nested additions off `e`.
fn split_terms(e: &Expr, k: usize) -> Option<Vec<&Expr>> {
    if k == 1 {
        return Some(vec![e]);
    }
    match e {
        Expr::Binary(BinaryOp::Add, l, r) => {
            let mut terms = split_terms(l, k - 1)?;
            terms.push(r);
            Some(terms)
        }
        _ => None,
    }
}

/// Depth of `e` counted in template nodes (a unary fuses with its operand),
/// or `None` when `e` contains two unaries in a row.
pub fn template_depth(e: &Expr) -> Option<usize> {
    fn fused(e: &Expr) -> Option<usize> {
        match e {
            Expr::Leaf(_) => Some(1),
            Expr::Unary(_, c) if matches!(**c, Expr::Unary(..)) => None,
            Expr::Unary(_, c) => fused(c),
            Expr::Binary(_, l, r) => Some(1 + fused(l)?.max(fused(r)?)),
        }
    }
    fused(&e.without_identity())
}
