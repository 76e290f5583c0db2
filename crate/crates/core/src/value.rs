//! Runtime values of finite evaluation.
//!
//! The derived ordering is the documented witness order: integers ascending,
//! then pairs lexicographically, then sets by their sorted element sequence.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Pair(Arc<(Value, Value)>),
    Set(Arc<BTreeSet<Value>>),
}

pub type ValueSet = BTreeSet<Value>;

impl Value {
    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Arc::new((a, b)))
    }

    pub fn set(items: impl IntoIterator<Item = Value>) -> Value {
        Value::Set(Arc::new(items.into_iter().collect()))
    }

    pub fn from_set(s: ValueSet) -> Value {
        Value::Set(Arc::new(s))
    }

    pub fn empty() -> Value {
        Value::Set(Arc::new(BTreeSet::new()))
    }

    /// Left-nested tuple of the items; the item itself when there is one.
    pub fn tuple(items: impl IntoIterator<Item = Value>) -> Value {
        let mut it = items.into_iter();
        let first = it.next().expect("empty tuple");
        it.fold(first, Value::pair)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&Value, &Value)> {
        match self {
            Value::Pair(p) => Some((&p.0, &p.1)),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&ValueSet> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    /// Smallest value of all pairs whose first component is `first`.
    pub(crate) fn pair_lower_bound(first: &Value) -> Value {
        Value::pair(first.clone(), Value::Int(i64::MIN))
    }
}

/// Elements `y` with `(x, y)` in `rel`, via an ordered range scan.
pub fn relation_image_of<'a>(rel: &'a ValueSet, x: &Value) -> impl Iterator<Item = &'a Value> + 'a {
    let lo = Value::pair_lower_bound(x);
    let x = x.clone();
    rel.range(lo..).map_while(move |v| match v {
        Value::Pair(p) if p.0 == x => Some(&p.1),
        _ => None,
    })
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Pair(p) => write!(f, "({},{})", p.0, p.1),
            Value::Set(s) => {
                write!(f, "{{")?;
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}
