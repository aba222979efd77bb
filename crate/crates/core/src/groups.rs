//! Discrete groups given by generators: Schottky and genus-2 presets, reduced words,
//! conjugacy-class enumeration and self-crossings of closed geodesics.
//!
//! Discreteness of Schottky presets is certified by ping-pong on Dirichlet half-planes
//! `{z : d(z, s p) < d(z, p)}` seen from a base point `p`: if the boundary arcs of these
//! half-planes are pairwise disjoint the generators freely generate a discrete group.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::hyp2::{
    angle_between, axis, direction_toward, distance, geodesic_flow, translation_length,
    BoundaryPoint, CurvatureScale, Isometry, IsometryKind, PointUHP, UnitTangent,
};
use crate::orbits::{CrossedGeodesic, CrossingMode};

/// Longest word accepted by [`enumerate_conjugacy`].
pub const MAX_WORD_LENGTH: usize = 12;
/// Longest coset representative accepted by [`detect_crossings`].
pub const MAX_CUT_LENGTH: usize = 10;
/// Upper limit on the number of reduced words visited in one enumeration.
pub const MAX_ENUMERATED_WORDS: u64 = 50_000_000;
/// Accepted determinant drift of a matrix read from disk.
pub const LOAD_DET_TOL: f64 = 1e-9;

/// Crossings closer than this along the axis (at both visits) are identified.
const CROSSING_MERGE_TOL: f64 = 1e-4;
/// Translates meeting the axis at a smaller angle share an endpoint with it up to rounding.
const MIN_CROSSING_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedIsometry {
    pub name: String,
    pub matrix: Isometry,
}

/// How discreteness of a generator set is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Discreteness {
    /// Ping-pong arcs seen from `base`; positive `min_gap` certifies a free discrete group.
    PingPong { base: PointUHP, min_gap: f64 },
    /// Stored cocompact preset whose defining relation holds to `relation_residual`.
    Cocompact { relation_residual: f64 },
}

impl Discreteness {
    pub fn certified(&self) -> bool {
        match *self {
            Discreteness::PingPong { min_gap, .. } => min_gap > 0.0,
            Discreteness::Cocompact { relation_residual } => relation_residual <= 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub generators: Vec<NamedIsometry>,
    pub discreteness: Discreteness,
}

#[derive(Serialize, Deserialize)]
struct StoredGenerator {
    name: String,
    matrix: [[f64; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct StoredSet {
    generators: Vec<StoredGenerator>,
}

impl GeneratorSet {
    /// Wraps hyperbolic generators and evaluates the ping-pong certificate from `base`.
    pub fn new(generators: Vec<NamedIsometry>, base: PointUHP) -> Result<Self> {
        if generators.is_empty() {
            return Err(GeomError::EmptyInput);
        }
        for g in &generators {
            if g.matrix.kind() != IsometryKind::Hyperbolic {
                return Err(GeomError::NotHyperbolic {
                    trace: g.matrix.trace().abs(),
                });
            }
        }
        let min_gap = ping_pong_gap(generators.iter().map(|g| &g.matrix), base);
        Ok(Self {
            generators,
            discreteness: Discreteness::PingPong { base, min_gap },
        })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn is_certified(&self) -> bool {
        self.discreteness.certified()
    }

    pub fn matrix(&self, letter: Letter) -> Isometry {
        let g = self.generators[letter.generator].matrix;
        if letter.inverse {
            g.inverse()
        } else {
            g
        }
    }

    /// Product of the letters, leftmost factor applied last.
    pub fn evaluate(&self, word: &Word) -> Isometry {
        word.letters()
            .iter()
            .fold(Isometry::identity(), |acc, &l| acc.compose(&self.matrix(l)))
    }

    /// The same group conjugated by `h`; the certificate base point moves along.
    pub fn conjugated(&self, h: &Isometry) -> Self {
        let generators = self
            .generators
            .iter()
            .map(|g| NamedIsometry {
                name: g.name.clone(),
                matrix: g.matrix.conjugate_by(h),
            })
            .collect();
        let discreteness = match self.discreteness {
            Discreteness::PingPong { base, min_gap } => Discreteness::PingPong {
                base: h.apply_point(base),
                min_gap,
            },
            other => other,
        };
        Self {
            generators,
            discreteness,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let stored = StoredSet {
            generators: self
                .generators
                .iter()
                .map(|g| StoredGenerator {
                    name: g.name.clone(),
                    matrix: [[g.matrix.a, g.matrix.b], [g.matrix.c, g.matrix.d]],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&stored).map_err(|e| GeomError::DomainError(e.to_string()))
    }

    /// Parses named row-major matrices; each must have determinant 1 up to [`LOAD_DET_TOL`].
    pub fn from_json(text: &str) -> Result<Self> {
        let stored: StoredSet =
            serde_json::from_str(text).map_err(|e| GeomError::DomainError(e.to_string()))?;
        let generators = stored
            .generators
            .into_iter()
            .map(|g| {
                let [[a, b], [c, d]] = g.matrix;
                let det = a * d - b * c;
                if (det - 1.0).abs() > LOAD_DET_TOL {
                    return Err(GeomError::DomainError(format!(
                        "generator {} has determinant {det}",
                        g.name
                    )));
                }
                Ok(NamedIsometry {
                    name: g.name,
                    matrix: Isometry::new(a, b, c, d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(generators, PointUHP::i())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| GeomError::DomainError(e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| GeomError::DomainError(e.to_string()))
    }
}

/// Smallest angular gap between the ping-pong arcs of `gens ∪ gens⁻¹` seen from `base`.
///
/// The half-plane of `s` is bounded by the perpendicular bisector of `base` and `s·base`;
/// its arc is centred on the direction toward `s·base` with half-width `Π(d/2)`, the angle
/// of parallelism, where `cos Π(r) = tanh r` in curvature `-1` units.
pub fn ping_pong_gap<'a>(gens: impl Iterator<Item = &'a Isometry>, base: PointUHP) -> f64 {
    let arcs: Vec<(f64, f64)> = gens
        .flat_map(|g| [*g, g.inverse()])
        .map(|s| {
            let image = s.apply_point(base);
            match direction_toward(base, image) {
                Ok(dir) => (
                    dir,
                    (distance(base, image, CurvatureScale::UNIT) / 2.0)
                        .tanh()
                        .acos(),
                ),
                Err(_) => (0.0, PI),
            }
        })
        .collect();
    let mut gap = f64::INFINITY;
    for (i, &(c1, w1)) in arcs.iter().enumerate() {
        for &(c2, w2) in &arcs[i + 1..] {
            gap = gap.min(angle_between(c1, c2) - w1 - w2);
        }
    }
    gap
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchottkyLayout {
    /// Disjoint axes at distance `separation`, both translating toward the same end.
    Disjoint,
    /// Axes crossing at `i` with angle `separation`.
    Crossing,
}

/// Two hyperbolic generators of translation length `strength` in the given layout.
///
/// Lengths are measured in curvature `-κ²`. With `strict` set, a failed ping-pong
/// certificate is an error; otherwise it is stored and reported.
pub fn schottky_generators(
    layout: SchottkyLayout,
    separation: f64,
    strength: f64,
    kappa: CurvatureScale,
    strict: bool,
) -> Result<GeneratorSet> {
    let k = kappa.get();
    let ell = k * strength;
    // Hyperbolic along the unit semicircle, toward +1.
    let (ch, sh) = ((ell / 2.0).cosh(), (ell / 2.0).sinh());
    let h = Isometry::new(ch, sh, sh, ch)?;
    if h.kind() != IsometryKind::Hyperbolic {
        return Err(GeomError::NotHyperbolic {
            trace: h.trace().abs(),
        });
    }
    let (a, b) = match layout {
        SchottkyLayout::Disjoint => {
            if !(separation > 0.0) {
                return Err(GeomError::DomainError(format!(
                    "axis separation {separation} must be positive"
                )));
            }
            let r = (k * separation / 2.0).exp();
            let dilation = |s: f64| Isometry::new(s.sqrt(), 0.0, 0.0, 1.0 / s.sqrt());
            (
                h.conjugate_by(&dilation(1.0 / r)?),
                h.conjugate_by(&dilation(r)?),
            )
        }
        SchottkyLayout::Crossing => {
            if !(separation > 0.0 && separation < PI) {
                return Err(GeomError::DomainError(format!(
                    "crossing angle {separation} outside (0, pi)"
                )));
            }
            (h, h.conjugate_by(&Isometry::rotation_about_i(separation)))
        }
    };
    let gs = GeneratorSet::new(
        vec![
            NamedIsometry {
                name: "a".into(),
                matrix: a,
            },
            NamedIsometry {
                name: "b".into(),
                matrix: b,
            },
        ],
        PointUHP::i(),
    )?;
    if strict && !gs.is_certified() {
        return Err(GeomError::NotDiscrete);
    }
    Ok(gs)
}

/// Side pairings `g₀, …, g₃` of the regular octagon with angles `π/4`, scaled to curvature `-κ²`.
///
/// They satisfy `g₀ g₁⁻¹ g₂ g₃⁻¹ g₀⁻¹ g₁ g₂⁻¹ g₃ = 1`; the residual is stored.
pub fn genus_two(kappa: CurvatureScale) -> Result<GeneratorSet> {
    let alpha = 1.0 + 2f64.sqrt();
    let beta = (2.0 + 2.0 * 2f64.sqrt()).sqrt();
    let to_upper = |k: usize| -> Result<Isometry> {
        // Disc-model matrix [[α, e^{iφ}β], [e^{-iφ}β, α]] conjugated by the Cayley transform.
        let e = Complex64::from_polar(1.0, k as f64 * PI / 4.0);
        let (a, b, c, d) = (
            Complex64::from(alpha),
            e * beta,
            e.conj() * beta,
            Complex64::from(alpha),
        );
        let i = Complex64::i();
        // C = [[1, -i], [1, i]], C⁻¹ = [[i, i], [-1, 1]] / 2i.
        let (m11, m12, m21, m22) = (a + b, (-a + b) * i, c + d, (-c + d) * i);
        let two_i = 2.0 * i;
        let r11 = (i * m11 + i * m21) / two_i;
        let r12 = (i * m12 + i * m22) / two_i;
        let r21 = (-m11 + m21) / two_i;
        let r22 = (-m12 + m22) / two_i;
        Isometry::new(r11.re, r12.re, r21.re, r22.re)
    };
    // Curvature only rescales lengths; the matrices are the same for every κ.
    let _ = kappa;
    let generators = (0..4)
        .map(|k| {
            Ok(NamedIsometry {
                name: format!("g{k}"),
                matrix: to_upper(k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gs = GeneratorSet {
        generators,
        discreteness: Discreteness::Cocompact {
            relation_residual: 0.0,
        },
    };
    let relation = Word::parse("aBcDAbCd")?;
    let residual = projective_distance_to_identity(&gs.evaluate(&relation));
    Ok(GeneratorSet {
        discreteness: Discreteness::Cocompact {
            relation_residual: residual,
        },
        ..gs
    })
}

fn projective_distance_to_identity(m: &Isometry) -> f64 {
    let id = Isometry::identity();
    [1.0, -1.0]
        .iter()
        .map(|s| {
            (m.a - s * id.a)
                .abs()
                .max(m.b.abs())
                .max(m.c.abs())
                .max((m.d - s * id.d).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// A generator or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Self { generator, inverse }
    }

    pub fn inv(self) -> Self {
        Self {
            inverse: !self.inverse,
            ..self
        }
    }

    fn code(self) -> usize {
        2 * self.generator + self.inverse as usize
    }
}

/// A word in the generators, written `a`, `b`, … with capitals for inverses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Word(Vec<Letter>);

impl Word {
    /// Freely reduces the letter sequence.
    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inv()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .map(|ch| {
                if !ch.is_ascii_alphabetic() {
                    return Err(GeomError::DomainError(format!("invalid letter {ch:?}")));
                }
                let generator = (ch.to_ascii_lowercase() as u8 - b'a') as usize;
                Ok(Letter::new(generator, ch.is_ascii_uppercase()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        Self::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != w[0].inv())
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced() && (self.0.len() < 2 || self.0[0] != self.0[self.0.len() - 1].inv())
    }

    /// Cyclic reduction: strips inverse pairs from the two ends.
    pub fn cyclically_reduced(&self) -> Self {
        let w = Self::new(self.0.iter().copied());
        let (mut lo, mut hi) = (0, w.0.len());
        while hi - lo >= 2 && w.0[lo] == w.0[hi - 1].inv() {
            lo += 1;
            hi -= 1;
        }
        Self(w.0[lo..hi].to_vec())
    }

    /// Lexicographically least rotation of the word or of its inverse: one representative
    /// per unoriented conjugacy class.
    pub fn canonical(&self) -> Self {
        let w = self.cyclically_reduced();
        let inv = w.inverse();
        let n = w.0.len();
        let rotations = |v: &Word| -> Vec<Vec<usize>> {
            (0..n.max(1))
                .map(|k| (0..n).map(|j| v.0[(k + j) % n].code()).collect())
                .collect()
        };
        let best = rotations(&w)
            .into_iter()
            .chain(rotations(&inv))
            .min()
            .unwrap_or_default();
        Self(
            best.into_iter()
                .map(|c| Letter::new(c / 2, c % 2 == 1))
                .collect(),
        )
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for l in &self.0 {
            let ch = (b'a' + l.generator as u8) as char;
            write!(
                f,
                "{}",
                if l.inverse {
                    ch.to_ascii_uppercase()
                } else {
                    ch
                }
            )?;
        }
        Ok(())
    }
}

fn word_count(generators: usize, max_len: usize) -> u64 {
    let letters = 2 * generators as u64;
    (1..=max_len as u32)
        .map(|n| letters * (letters - 1).pow(n - 1))
        .sum()
}

/// All reduced words of length `1..=max_len`, in a deterministic order.
fn reduced_words(generators: usize, max_len: usize) -> Vec<Word> {
    let letters: Vec<Letter> = (0..generators)
        .flat_map(|g| [Letter::new(g, false), Letter::new(g, true)])
        .collect();
    let mut layer: Vec<Word> = letters.iter().map(|&l| Word(vec![l])).collect();
    let mut out = Vec::new();
    for _ in 1..max_len {
        let next: Vec<Word> = layer
            .par_iter()
            .flat_map_iter(|w| {
                let last = *w.0.last().expect("nonempty");
                letters
                    .iter()
                    .filter(move |&&l| l != last.inv())
                    .map(move |&l| {
                        let mut v = w.0.clone();
                        v.push(l);
                        Word(v)
                    })
            })
            .collect();
        out.append(&mut layer);
        layer = next;
    }
    out.append(&mut layer);
    out
}

/// One entry of the enumerated length spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyClass {
    pub word: Word,
    pub length: f64,
}

/// One cyclically reduced representative per unoriented conjugacy class of word length
/// at most `max_len`, sorted by translation length.
pub fn enumerate_conjugacy(
    gs: &GeneratorSet,
    max_len: usize,
    kappa: CurvatureScale,
) -> Result<Vec<ConjugacyClass>> {
    if max_len > MAX_WORD_LENGTH {
        return Err(GeomError::BudgetExceeded {
            requested: max_len,
            budget: MAX_WORD_LENGTH,
        });
    }
    let count = word_count(gs.len(), max_len);
    if count > MAX_ENUMERATED_WORDS {
        return Err(GeomError::BudgetExceeded {
            requested: count as usize,
            budget: MAX_ENUMERATED_WORDS as usize,
        });
    }
    let mut classes: Vec<ConjugacyClass> = reduced_words(gs.len(), max_len)
        .into_par_iter()
        .filter(|w| w.is_cyclically_reduced() && w.canonical() == *w)
        .filter_map(|word| {
            let g = gs.evaluate(&word);
            translation_length(&g, kappa)
                .ok()
                .map(|length| ConjugacyClass { word, length })
        })
        .collect();
    classes.sort_by(|x, y| {
        x.length
            .total_cmp(&y.length)
            .then_with(|| x.word.cmp(&y.word))
    });
    Ok(classes)
}

/// Half the shortest enumerated translation length: an upper estimate of the injectivity radius
/// that is exact once the systole is reached by words of length at most `max_len`.
pub fn injectivity_lower_bound(
    gs: &GeneratorSet,
    max_len: usize,
    kappa: CurvatureScale,
) -> Result<f64> {
    if !gs.is_certified() {
        return Err(GeomError::NotDiscrete);
    }
    let classes = enumerate_conjugacy(gs, max_len, kappa)?;
    classes
        .first()
        .map(|c| c.length / 2.0)
        .ok_or(GeomError::EmptyInput)
}

/// A transversal self-intersection of the closed geodesic of a word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Axis parameter in `[0, T)` of the first visit, measured from the axis base frame.
    pub s: f64,
    /// Return time to the crossing point, in `(0, T)`.
    pub t1: f64,
    pub t2: f64,
    /// Angle in `(0, π)` between the two branches, oriented forward.
    pub angle: f64,
    /// `π − angle`: the crossing angle in the partner-orbit convention.
    pub eps: f64,
    /// Coset representative `η` with `η c(s₂) = c(s₁)`.
    pub eta: Word,
    /// Deck element of the first loop, `γ₁ c(s) = c(s + T1)`.
    pub g1: Isometry,
    /// The closing element `γ`.
    pub g: Isometry,
    /// `γ₁` in the frame where the crossing tangent is `i` pointing up.
    pub g1_local: Isometry,
    /// Unit tangent `ċ(s)` at the crossing.
    pub tangent: UnitTangent,
}

impl Crossing {
    /// The crossing as a normalized crossed geodesic based at `i`, ready for partner construction.
    pub fn to_crossed_geodesic(&self, kappa: CurvatureScale) -> CrossedGeodesic {
        // Rebuilt from the local data: conjugating through the frame of a far-out crossing
        // point loses accuracy.
        let g = Isometry::translation_imaginary_axis(kappa.get() * (self.t1 + self.t2));
        let g1 = self.g1_local;
        CrossedGeodesic {
            kappa,
            v0: UnitTangent::i_up(),
            t1: self.t1,
            t2: self.t2,
            eps: self.eps,
            mode: CrossingMode::Partner,
            g1,
            g,
            g2: g.compose(&g1.inverse()),
            orientation: 1.0,
        }
    }
}

/// Self-crossings of the closed geodesic of `word` found among translates `η·axis(γ)` with
/// `η` of word length at most `cut`. Completeness beyond the cutoff is not claimed.
pub fn detect_crossings(
    word: &Word,
    gs: &GeneratorSet,
    cut: usize,
    kappa: CurvatureScale,
) -> Result<Vec<Crossing>> {
    if cut > MAX_CUT_LENGTH {
        return Err(GeomError::BudgetExceeded {
            requested: cut,
            budget: MAX_CUT_LENGTH,
        });
    }
    let gamma = gs.evaluate(word);
    let period = translation_length(&gamma, kappa)?;
    let line = axis(&gamma, kappa)?;
    // Normalize so that the axis is the imaginary axis traversed upward, base frame at `i`.
    let k = line.base.frame().inverse();
    let kinv = k.inverse();
    let kappa_v = kappa.get();
    let height_param = |p: PointUHP| p.y.ln() / kappa_v;
    let etas = reduced_words(gs.len(), cut);
    let mut found: Vec<Crossing> = etas
        .par_iter()
        .filter_map(|eta| {
            let m = gs.evaluate(eta).conjugate_by(&k);
            let (BoundaryPoint::Finite(x1), BoundaryPoint::Finite(x2)) = (
                m.apply_boundary(BoundaryPoint::Finite(0.0)),
                m.apply_boundary(BoundaryPoint::Infinity),
            ) else {
                return None;
            };
            if !(x1 * x2 < 0.0) {
                return None;
            }
            let x = PointUHP {
                x: 0.0,
                y: (-x1 * x2).sqrt(),
            };
            let preimage = m.inverse().apply_point(x);
            let (s, s2) = (height_param(x), height_param(preimage));
            let wrap = |t: f64| {
                let r = t.rem_euclid(period);
                if period - r < 1e-9 * period.max(1.0) {
                    0.0
                } else {
                    r
                }
            };
            let (sigma, sigma2) = (wrap(s), wrap(s2));
            // Orient so that the first visit comes first in [0, T).
            let (eta, m, s, s2, sigma, sigma2) = if sigma <= sigma2 {
                (eta.clone(), m, s, s2, sigma, sigma2)
            } else {
                (eta.inverse(), m.inverse(), s2, s, sigma2, sigma)
            };
            let t1 = sigma2 - sigma;
            if t1 <= 0.0 {
                return None;
            }
            let j = ((s - sigma) / period).round();
            let shift = ((sigma2 - s2) / period).round();
            let translate = |t: f64| Isometry::translation_imaginary_axis(kappa_v * t);
            // γ₁ = γ^shift η₀⁻¹ with η₀ = γ^{-j} η, written in the frame of the crossing tangent;
            // the large powers of γ are folded into exact translations.
            let g1_local = translate(shift * period - sigma)
                .compose(&m.inverse())
                .compose(&translate(j * period + sigma));
            let to_axis_frame = translate(sigma);
            let g1n = g1_local.conjugate_by(&to_axis_frame);
            let base = UnitTangent::new(
                PointUHP {
                    x: 0.0,
                    y: (kappa_v * sigma).exp(),
                },
                std::f64::consts::FRAC_PI_2,
            );
            let v0 = UnitTangent::i_up();
            let arrival = geodesic_flow(v0, t1, kappa);
            let image = g1_local.apply_tangent(v0);
            let angle = PI - angle_between(image.direction, arrival.direction + PI);
            if !(MIN_CROSSING_ANGLE..=PI - MIN_CROSSING_ANGLE).contains(&angle) {
                return None;
            }
            Some(Crossing {
                s: sigma,
                t1,
                t2: period - t1,
                angle,
                eps: PI - angle,
                eta,
                g1: g1n.conjugate_by(&kinv),
                g: gamma,
                g1_local,
                tangent: kinv.apply_tangent(base),
            })
        })
        .collect();
    // Members of one double coset give the same crossing; keep the shortest representative,
    // which is also the most accurately evaluated one.
    found.sort_by(|x, y| (x.eta.len(), &x.eta).cmp(&(y.eta.len(), &y.eta)));
    let circular = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(period);
        d.min(period - d)
    };
    let mut unique: Vec<Crossing> = Vec::new();
    for c in found {
        // A crossing is an unordered pair of visits on the circle of length T.
        let same = |u: &Crossing| {
            let (a, b, x, y) = (u.s, u.s + u.t1, c.s, c.s + c.t1);
            let close = |p: f64, q: f64| circular(p, q) < CROSSING_MERGE_TOL;
            (close(a, x) && close(b, y)) || (close(a, y) && close(b, x))
        };
        if !unique.iter().any(same) {
            unique.push(c);
        }
    }
    unique.sort_by(|x, y| x.s.total_cmp(&y.s).then(x.t1.total_cmp(&y.t1)));
    Ok(unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{make_constants, CurvatureBounds};
    use crate::orbits::{construct_partner, loop_midpoint_chain};
    use proptest::prelude::*;

    const K1: CurvatureScale = CurvatureScale::UNIT;

    fn pants() -> GeneratorSet {
        schottky_generators(SchottkyLayout::Disjoint, 3.0, 3.0, K1, true).unwrap()
    }

    fn torus() -> GeneratorSet {
        schottky_generators(SchottkyLayout::Crossing, PI / 2.0, 3.0, K1, true).unwrap()
    }

    #[test]
    fn words_reduce_and_canonicalize() {
        let w = Word::parse("abBAab").unwrap();
        assert_eq!(w.to_string(), "ab");
        assert_eq!(
            Word::parse("Aba").unwrap().cyclically_reduced().to_string(),
            "b"
        );
        let x = Word::parse("abAB").unwrap();
        let rot = Word::parse("bABa").unwrap();
        assert_eq!(x.canonical(), rot.canonical());
        assert_eq!(x.canonical(), x.inverse().canonical());
        assert!(Word::parse("a1").is_err());
    }

    #[test]
    fn schottky_certificate_tracks_separation() {
        assert!(
            schottky_generators(SchottkyLayout::Disjoint, 4.0, 2.0, K1, true)
                .unwrap()
                .is_certified()
        );
        let close = schottky_generators(SchottkyLayout::Disjoint, 0.05, 2.0, K1, false).unwrap();
        assert!(!close.is_certified());
        assert_eq!(
            schottky_generators(SchottkyLayout::Disjoint, 0.05, 2.0, K1, true).unwrap_err(),
            GeomError::NotDiscrete
        );
    }

    #[test]
    fn crossing_torus_certificate_threshold() {
        // Orthogonal axes: certified exactly when tanh(ℓ/2) > cos(π/4), ℓ > 2 asinh(1).
        let threshold = 2.0 * 1f64.asinh();
        let pass = schottky_generators(
            SchottkyLayout::Crossing,
            PI / 2.0,
            threshold + 1e-6,
            K1,
            false,
        )
        .unwrap();
        let fail = schottky_generators(
            SchottkyLayout::Crossing,
            PI / 2.0,
            threshold - 1e-6,
            K1,
            false,
        )
        .unwrap();
        assert!(pass.is_certified() && !fail.is_certified());
    }

    #[test]
    fn weak_generators_are_rejected() {
        let err = schottky_generators(SchottkyLayout::Disjoint, 2.0, 1e-12, K1, false).unwrap_err();
        assert!(matches!(err, GeomError::NotHyperbolic { .. }));
    }

    #[test]
    fn generators_are_deterministic_and_have_requested_length() {
        let (x, y) = (pants(), pants());
        assert_eq!(x, y);
        for g in &x.generators {
            assert!((translation_length(&g.matrix, K1).unwrap() - 3.0).abs() < 1e-12);
        }
        let half = CurvatureScale::new(0.5).unwrap();
        let gs = schottky_generators(SchottkyLayout::Disjoint, 3.0, 3.0, half, false).unwrap();
        assert!((translation_length(&gs.generators[0].matrix, half).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_determinant_check() {
        let gs = pants();
        let back = GeneratorSet::from_json(&gs.to_json().unwrap()).unwrap();
        for (a, b) in gs.generators.iter().zip(&back.generators) {
            assert!(a.matrix.approx_eq(&b.matrix, 1e-15) && a.name == b.name);
        }
        let bad = r#"{"generators":[{"name":"a","matrix":[[2.0,0.0],[0.0,1.0]]}]}"#;
        assert!(GeneratorSet::from_json(bad).is_err());
    }

    #[test]
    fn genus_two_relation_holds() {
        let gs = genus_two(K1).unwrap();
        assert!(gs.is_certified(), "{:?}", gs.discreteness);
        let side = 2.0 * (1.0 + 2f64.sqrt()).acosh();
        for g in &gs.generators {
            assert!((translation_length(&g.matrix, K1).unwrap() - side).abs() < 1e-12);
        }
    }

    #[test]
    fn length_one_classes() {
        let classes = enumerate_conjugacy(&pants(), 1, K1).unwrap();
        assert_eq!(classes.len(), 2);
        let gs = pants();
        for g in &gs.generators {
            let l = translation_length(&g.matrix, K1).unwrap();
            assert_eq!(l, translation_length(&g.matrix.inverse(), K1).unwrap());
        }
    }

    #[test]
    fn product_length_matches_trace() {
        let gs = torus();
        let ab = gs.evaluate(&Word::parse("ab").unwrap());
        let oracle = 2.0 * (ab.trace().abs() / 2.0).acosh();
        assert!((translation_length(&ab, K1).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn enumeration_is_stable_and_duplicate_free() {
        let gs = torus();
        let short = enumerate_conjugacy(&gs, 4, K1).unwrap();
        let long = enumerate_conjugacy(&gs, 5, K1).unwrap();
        let keep: Vec<_> = long.iter().filter(|c| c.word.len() <= 4).cloned().collect();
        assert_eq!(short, keep);
        let mut seen = std::collections::HashSet::new();
        assert!(long.iter().all(|c| seen.insert(c.word.canonical())));
        assert!(enumerate_conjugacy(&gs, 13, K1).is_err());
    }

    #[test]
    fn systole_proxy_is_monotone() {
        let gs = torus();
        let values: Vec<f64> = (1..=6)
            .map(|l| injectivity_lower_bound(&gs, l, K1).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
        let single = GeneratorSet::new(vec![gs.generators[0].clone()], PointUHP::i()).unwrap();
        assert!((injectivity_lower_bound(&single, 3, K1).unwrap() - 1.5).abs() < 1e-12);
        let far = schottky_generators(SchottkyLayout::Disjoint, 6.0, 3.0, K1, true).unwrap();
        for l in 1..=6 {
            assert!((injectivity_lower_bound(&far, l, K1).unwrap() - 1.5).abs() < 1e-12);
        }
        let unchecked = GeneratorSet::new(
            vec![gs.generators[0].clone(), gs.generators[0].clone()],
            PointUHP::i(),
        )
        .unwrap();
        assert_eq!(
            injectivity_lower_bound(&unchecked, 1, K1).unwrap_err(),
            GeomError::NotDiscrete
        );
    }

    #[test]
    fn generators_are_simple() {
        for gs in [pants(), torus()] {
            for w in ["a", "b", "A"] {
                assert!(detect_crossings(&Word::parse(w).unwrap(), &gs, 6, K1)
                    .unwrap()
                    .is_empty());
            }
        }
    }

    #[test]
    fn figure_eight_crosses_once() {
        let gs = pants();
        // Both axes translate toward +1, so `aB` bounds a pair of pants with `a` and `b`
        // and `ab` is the figure eight.
        for cut in 2..=6 {
            let crossings = detect_crossings(&Word::parse("ab").unwrap(), &gs, cut, K1).unwrap();
            assert_eq!(crossings.len(), 1, "cut {cut}: {crossings:?}");
        }
        assert!(detect_crossings(&Word::parse("aB").unwrap(), &gs, 6, K1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn crossing_angle_is_conjugation_invariant() {
        let gs = pants();
        let w = Word::parse("ab").unwrap();
        let base = detect_crossings(&w, &gs, 4, K1).unwrap();
        let h = Isometry::new(2.0, 0.7, 0.3, 0.6).unwrap();
        let moved = detect_crossings(&w, &gs.conjugated(&h), 4, K1).unwrap();
        assert_eq!(base.len(), moved.len());
        for (a, b) in base.iter().zip(&moved) {
            assert!((a.angle - b.angle).abs() < 1e-9 && (a.t1 - b.t1).abs() < 1e-9);
        }
    }

    #[test]
    fn detected_crossings_are_consistent_crossed_geodesics() {
        let gs = torus();
        for w in ["aab", "abAB", "aabb"] {
            for c in detect_crossings(&Word::parse(w).unwrap(), &gs, 5, K1).unwrap() {
                let cg = c.to_crossed_geodesic(K1);
                assert!(
                    cg.g.approx_eq(&Isometry::translation_imaginary_axis(c.t1 + c.t2), 1e-8),
                    "{w}"
                );
                assert!((cg.crossing_angle() - c.eps).abs() < 1e-8, "{w}: {c:?}");
                // γ₁ returns the crossing point to c(T1).
                let p1 = cg.g1.apply_point(PointUHP::i());
                assert!(distance(p1, cg.lift_point(c.t1), K1) < 1e-8);
            }
        }
    }

    #[test]
    fn small_angle_crossings_obey_partner_length_bound() {
        let gs = schottky_generators(SchottkyLayout::Crossing, PI / 3.0, 3.0, K1, true).unwrap();
        let constants = make_constants(CurvatureBounds::constant(1.0).unwrap(), 5.0, 0.5).unwrap();
        let proxy = injectivity_lower_bound(&gs, 4, K1).unwrap();
        let mut checked = 0;
        for w in ["aaabAAAb", "abbbaBBB", "abABBAbb", "aabaBAAB"] {
            for c in detect_crossings(&Word::parse(w).unwrap(), &gs, 5, K1).unwrap() {
                let cg = c.to_crossed_geodesic(K1);
                let chain = loop_midpoint_chain(&cg.g1, cg.v0, cg.t1, K1);
                assert!(chain.rho_mid >= 2.0 * proxy - 1e-9);
                if c.eps <= constants.eps0 && c.t1 >= constants.t0 && c.t2 >= constants.t0 {
                    let r = construct_partner(&cg, &constants).unwrap();
                    assert!(r.passed.length && r.t_prime < r.t, "{w}: {r:?}");
                    checked += 1;
                }
            }
        }
        assert!(checked >= 4, "{checked}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn translation_length_is_a_class_function(
            w in proptest::collection::vec((0usize..2, any::<bool>()), 1..8),
            c in proptest::collection::vec((0usize..2, any::<bool>()), 0..5),
        ) {
            let gs = torus();
            let w = Word::new(w.into_iter().map(|(g, i)| Letter::new(g, i))).cyclically_reduced();
            prop_assume!(!w.is_empty());
            let c = Word::new(c.into_iter().map(|(g, i)| Letter::new(g, i)));
            let conj = c.concat(&w).concat(&c.inverse());
            let (l1, l2) = (
                translation_length(&gs.evaluate(&w), K1).unwrap(),
                translation_length(&gs.evaluate(&conj), K1).unwrap(),
            );
            prop_assert!((l1 - l2).abs() <= 1e-11 * l1.max(1.0), "{} vs {}", l1, l2);
            prop_assert_eq!(w.canonical(), conj.canonical());
        }
    }
}
