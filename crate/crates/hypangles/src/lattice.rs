//! Enumeration of the finite ball Gamma intersect B_Q for built-in
//! arithmetic lattices and for user-supplied generator sets.
//!
//! PSL(2,Z) is enumerated directly: loop over the bottom row (c, d) with
//! c^2 + d^2 < Q^2 and gcd(c, d) = 1, then walk the arithmetic progression
//! of top rows solving ad - bc = 1. Generator sets go through a
//! level-synchronous ball growth over the Cayley graph with canonical
//! deduplication.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::hyperbolic::GroupElement;
use crate::Error;

/// Quantization grid for hashing floating-point canonical entries.
/// Must exceed the rounding accumulated over words of length ~ log Q.
pub const DEDUP_GRID: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    Psl2z,
    Generators,
}

/// A lattice together with the metadata the statistics need: covolume,
/// stabilizer order at the base point, and the conjugator taking the
/// user's base point to i.
#[derive(Clone, Debug)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub generators: Vec<GroupElement>,
    /// V_Gamma, hyperbolic area of a fundamental domain.
    pub covolume: f64,
    /// Order of the stabilizer of the base point in Gamma.
    pub stabilizer_order: u32,
    /// Maps the user's base point to i; identity for the built-ins.
    pub conjugator: GroupElement,
    pub label: String,
}

impl LatticeSpec {
    /// The modular group PSL(2,Z) with base point i.
    /// Covolume pi/3; the stabilizer of i is {I, S}, order 2.
    pub fn psl2z() -> Self {
        LatticeSpec {
            kind: LatticeKind::Psl2z,
            generators: Vec::new(),
            covolume: PI / 3.0,
            stabilizer_order: 2,
            conjugator: GroupElement::identity(),
            label: "psl2z".to_string(),
        }
    }

    /// PSL(2,Z) presented by generators {T, S}, for cross-checking the
    /// generated enumeration against the direct one.
    pub fn psl2z_generated() -> Self {
        LatticeSpec {
            kind: LatticeKind::Generators,
            generators: vec![
                GroupElement::from_ints(1, 1, 0, 1).unwrap(),
                GroupElement::from_ints(0, 1, -1, 0).unwrap(),
            ],
            covolume: PI / 3.0,
            stabilizer_order: 2,
            conjugator: GroupElement::identity(),
            label: "psl2z-generated".to_string(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, Error> {
        let file: GeneratorFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_spec()
    }

    pub fn from_json_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Enumerate Gamma intersect B_Q with this lattice's scheme.
    pub fn enumerate(&self, q: f64, margin: f64) -> Result<BallEnumeration, Error> {
        match self.kind {
            LatticeKind::Psl2z => Ok(enumerate_psl2z(q)),
            LatticeKind::Generators => enumerate_generated(self, q, margin),
        }
    }
}

/// Generator file schema: matrices are row-major length-4 arrays whose
/// entries are numbers or exact rational strings like "3/2".
#[derive(Deserialize)]
struct GeneratorFile {
    label: String,
    covolume: f64,
    stabilizer_order: u32,
    generators: Vec<[serde_json::Value; 4]>,
    #[serde(default)]
    conjugator: Option<[serde_json::Value; 4]>,
}

fn parse_entry(v: &serde_json::Value) -> Result<(f64, Option<i64>), Error> {
    match v {
        serde_json::Value::Number(n) => {
            let x = n.as_f64().ok_or_else(|| Error::Parse("bad number".into()))?;
            let exact = n.as_i64().filter(|_| n.is_i64());
            Ok((x, exact))
        }
        serde_json::Value::String(s) => {
            let (num, den) = match s.split_once('/') {
                Some((p, q)) => (p.trim(), q.trim()),
                None => (s.trim(), "1"),
            };
            let p: i64 = num
                .parse()
                .map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
            let q: i64 = den
                .parse()
                .map_err(|_| Error::Parse(format!("bad rational '{s}'")))?;
            if q == 0 {
                return Err(Error::Parse(format!("zero denominator in '{s}'")));
            }
            let exact = if q == 1 { Some(p) } else { None };
            Ok((p as f64 / q as f64, exact))
        }
        _ => Err(Error::Parse("matrix entries must be numbers or strings".into())),
    }
}

fn parse_matrix(entries: &[serde_json::Value; 4]) -> Result<GroupElement, Error> {
    let parsed: Vec<(f64, Option<i64>)> =
        entries.iter().map(parse_entry).collect::<Result<_, _>>()?;
    if let (Some(a), Some(b), Some(c), Some(d)) =
        (parsed[0].1, parsed[1].1, parsed[2].1, parsed[3].1)
    {
        GroupElement::from_ints(a, b, c, d)
    } else {
        GroupElement::from_floats(parsed[0].0, parsed[1].0, parsed[2].0, parsed[3].0)
    }
}

impl GeneratorFile {
    fn into_spec(self) -> Result<LatticeSpec, Error> {
        if self.covolume <= 0.0 {
            return Err(Error::Parse("covolume must be positive".into()));
        }
        if self.stabilizer_order == 0 {
            return Err(Error::Parse("stabilizer_order must be positive".into()));
        }
        let mut generators: Vec<GroupElement> = self
            .generators
            .iter()
            .map(parse_matrix)
            .collect::<Result<_, _>>()?;
        // Close under inverses.
        let mut keys: HashSet<[i64; 4]> = generators
            .iter()
            .map(|g| canonical_key(g))
            .collect();
        for g in generators.clone() {
            let inv = g.inverse();
            if keys.insert(canonical_key(&inv)) {
                generators.push(inv);
            }
        }
        let conjugator = match &self.conjugator {
            Some(m) => parse_matrix(m)?,
            None => GroupElement::identity(),
        };
        Ok(LatticeSpec {
            kind: LatticeKind::Generators,
            generators,
            covolume: self.covolume,
            stabilizer_order: self.stabilizer_order,
            conjugator,
            label: self.label,
        })
    }
}

fn canonical_key(g: &GroupElement) -> [i64; 4] {
    g.exact_entries()
        .unwrap_or_else(|| g.quantized_key(DEDUP_GRID))
}

/// The finite set Gamma intersect B_Q as canonical PSL representatives.
#[derive(Clone, Debug)]
pub struct BallEnumeration {
    pub q: f64,
    pub elements: Vec<GroupElement>,
    /// False when a budget cap stopped the ball growth early.
    pub complete: bool,
}

impl BallEnumeration {
    pub fn count(&self) -> usize {
        self.elements.len()
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Extended gcd: returns (g, x, y) with a*x + b*y = g.
fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = egcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// All of PSL(2,Z) with squared Frobenius norm < Q^2, canonically signed,
/// in lexicographic order of the entries (a, b, c, d).
pub fn enumerate_psl2z(q: f64) -> BallEnumeration {
    let q2 = q * q;
    if q2 < 2.0 {
        return BallEnumeration {
            q,
            elements: Vec::new(),
            complete: true,
        };
    }
    let cmax = q2.sqrt().floor() as i64;
    let mut elements: Vec<[i64; 4]> = (-cmax..=cmax)
        .into_par_iter()
        .map(|c| {
            let mut local: Vec<[i64; 4]> = Vec::new();
            let dmax = (q2 - (c * c) as f64).max(0.0).sqrt().floor() as i64;
            for d in -dmax..=dmax {
                if c == 0 && d == 0 {
                    continue;
                }
                if gcd(c, d) != 1 {
                    continue;
                }
                let rr = q2 - ((c * c + d * d) as f64);
                if rr <= 0.0 {
                    continue;
                }
                // Base solution of a*d - b*c = 1.
                let (_, x, y) = egcd(d, -c);
                let (a0, b0) = (x, y);
                // a = a0 + k c, b = b0 + k d; solve |(a, b)|^2 < rr for k.
                let p = (c * c + d * d) as f64;
                let s = (a0 * c + b0 * d) as f64;
                let t = (a0 * a0 + b0 * b0) as f64 - rr;
                let disc = s * s - p * t;
                if disc <= 0.0 {
                    continue;
                }
                let root = disc.sqrt();
                let klo = ((-s - root) / p).floor() as i64 - 1;
                let khi = ((-s + root) / p).ceil() as i64 + 1;
                for k in klo..=khi {
                    let a = a0 + k * c;
                    let b = b0 + k * d;
                    let n = a * a + b * b + c * c + d * d;
                    if (n as f64) < q2 {
                        // Keep only the canonical representative of {g, -g}.
                        let first = [a, b, c, d].into_iter().find(|&v| v != 0).unwrap();
                        if first > 0 {
                            local.push([a, b, c, d]);
                        }
                    }
                }
            }
            local
        })
        .flatten()
        .collect();
    elements.sort_unstable();
    let elements = elements
        .into_iter()
        .map(|[a, b, c, d]| GroupElement::from_ints(a, b, c, d).expect("det 1 by construction"))
        .collect();
    BallEnumeration {
        q,
        elements,
        complete: true,
    }
}

pub const DEFAULT_BFS_CAP: usize = 20_000_000;

/// Ball growth over the Cayley graph: breadth-first closure of the
/// generator set, exploring words of norm < margin * Q and returning the
/// subset of norm < Q. Output order is canonical, so the result does not
/// depend on generator order or thread count.
pub fn enumerate_generated(
    spec: &LatticeSpec,
    q: f64,
    margin: f64,
) -> Result<BallEnumeration, Error> {
    enumerate_generated_with_cap(spec, q, margin, DEFAULT_BFS_CAP)
}

pub fn enumerate_generated_with_cap(
    spec: &LatticeSpec,
    q: f64,
    margin: f64,
    cap: usize,
) -> Result<BallEnumeration, Error> {
    if spec.generators.is_empty() {
        return Err(Error::EmptyGenerators);
    }
    if margin < 1.0 {
        return Err(Error::BadMargin(margin));
    }
    let search_sq = (margin * q) * (margin * q);
    let keep_sq = q * q;

    let mut seen: HashSet<[i64; 4]> = HashSet::new();
    let mut all: Vec<GroupElement> = Vec::new();
    let mut frontier: Vec<GroupElement> = Vec::new();
    let mut complete = true;

    let id = GroupElement::identity();
    seen.insert(canonical_key(&id));
    all.push(id);
    frontier.push(id);

    'grow: while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            for g in &spec.generators {
                let prod = w.compose(g);
                if prod.norm_sq() >= search_sq {
                    continue;
                }
                if seen.insert(canonical_key(&prod)) {
                    all.push(prod);
                    next.push(prod);
                    if all.len() >= cap {
                        complete = false;
                        break 'grow;
                    }
                }
            }
        }
        frontier = next;
    }

    let mut elements: Vec<GroupElement> = all
        .into_iter()
        .filter(|g| g.norm_sq() < keep_sq)
        .collect();
    elements.sort_unstable_by_key(canonical_key);
    Ok(BallEnumeration {
        q,
        elements,
        complete,
    })
}

/// count * V_Gamma / (pi Q^2); tends to 1 as Q grows.
pub fn count_vs_asymptotic(enumeration: &BallEnumeration, spec: &LatticeSpec) -> f64 {
    enumeration.count() as f64 * spec.covolume / (PI * enumeration.q * enumeration.q)
}
