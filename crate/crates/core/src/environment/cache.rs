use std::collections::HashMap;

use crate::dsl::{fingerprint, Expr, Fingerprint, ProbeSet};

/// Entries hashed on the first few fingerprint values at four significant
/// digits; a bucket hit is confirmed against the full fingerprint.
const KEY_ENTRIES: usize = 8;
const KEY_DIGITS: i32 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum CacheKey {
    Numeric(Vec<(i32, i64)>),
    /// Non-finite fingerprints cannot be compared numerically; fall back to the text form.
    Structural(String),
}

fn quantize(v: f64) -> (i32, i64) {
    if v == 0.0 {
        return (i32::MIN, 0);
    }
    let exp = v.abs().log10().floor() as i32;
    let mant = (v / 10f64.powi(exp - KEY_DIGITS + 1)).round() as i64;
    (exp, mant)
}

/// Fingerprint plus the key it hashes under.
#[derive(Clone, Debug)]
pub(crate) struct Keyed {
    pub key: CacheKey,
    pub fingerprint: Fingerprint,
}

impl Keyed {
    pub fn new(expr: &Expr, probes: &ProbeSet) -> Self {
        let fingerprint = fingerprint(expr, probes);
        let key = if fingerprint.finite {
            CacheKey::Numeric(fingerprint.values.iter().take(KEY_ENTRIES).map(|&v| quantize(v)).collect())
        } else {
            CacheKey::Structural(expr.render())
        };
        Self { key, fingerprint }
    }

    fn same(&self, other: &Keyed, expr_text: &str, other_text: &str, tol: f64) -> bool {
        match self.key {
            CacheKey::Structural(_) => expr_text == other_text,
            CacheKey::Numeric(_) => self.fingerprint.agrees_with(&other.fingerprint, tol),
        }
    }
}

/// Fingerprint-keyed map from expressions to values of type `V`.
#[derive(Clone, Debug)]
pub(crate) struct FingerprintMap<V> {
    buckets: HashMap<CacheKey, Vec<(Keyed, String, V)>>,
    tol: f64,
    len: usize,
}

impl<V: Clone> FingerprintMap<V> {
    pub fn new(tol: f64) -> Self {
        Self {
            buckets: HashMap::new(),
            tol,
            len: 0,
        }
    }

    pub fn get(&self, keyed: &Keyed, text: &str) -> Option<&V> {
        self.buckets.get(&keyed.key)?.iter().find_map(|(k, t, v)| {
            k.same(keyed, t, text, self.tol).then_some(v)
        })
    }

    /// Inserts unless an equivalent entry exists; the first insertion wins.
    pub fn insert(&mut self, keyed: Keyed, text: String, value: V) {
        if self.get(&keyed, &text).is_some() {
            return;
        }
        self.buckets
            .entry(keyed.key.clone())
            .or_default()
            .push((keyed, text, value));
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }
}
