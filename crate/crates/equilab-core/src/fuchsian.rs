//! A concrete cocompact lattice in SL(2,R) — the Bolza regular-octagon group —
//! with Dirichlet-domain point reduction, truncated Gamma-periodized bump
//! observables on Y = Gamma \ SL(2,R), geodesic circles, exact Haar sampling
//! on Y, and cell histograms for equidistribution checks.
//!
//! The lattice contains -I (it is the preimage of a torsion-free uniform
//! lattice in PSL(2,R)); enumeration works with sign-canonicalized
//! representatives and periodization sums both signs, so every observable is
//! well defined on Y.

use crate::error::{CoreError, Result};
use crate::jet::JetC;
use crate::sl2::{
    entry_jets, exp_lie, hyperbolic_distance, iwasawa, iwasawa_jets, moebius, LieVector,
    Sl2Element, UpperHalfPoint,
};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::sync::OnceLock;

const REDUCTION_STEP_CAP: usize = 100_000;

/// Extra exploration beyond the stored radius: a shortest generator chain to
/// an element may pass through prefixes a couple of fundamental domains
/// further out than the target ball.
const ENUM_SLACK: f64 = 5.0;

/// Functions on SL(2,R) smooth enough for the quadratures: value plus exact
/// 2-jet in any right-invariant direction.
pub trait SmoothObservable: Sync {
    fn eval(&self, g: &Sl2Element) -> Complex64;
    /// Jet of s -> f(g exp(s dir)) at s = 0.
    fn eval_jet(&self, g: &Sl2Element, dir: &LieVector) -> JetC;
}

#[derive(Deserialize)]
struct GroupFile {
    #[serde(default)]
    name: String,
    generators: Vec<[[String; 2]; 2]>,
    relator: Vec<usize>,
}

/// Cocompact Fuchsian group given by side-pairing generators (closed under
/// inverses) and the defining relator word.
#[derive(Clone, Debug)]
pub struct FuchsianGroup {
    pub name: String,
    gens: Vec<Sl2Element>,
    relator: Vec<usize>,
    /// Sign-canonicalized elements with displacement <= enum_radius,
    /// sorted by displacement; identity first.
    shell: Vec<(Sl2Element, f64)>,
    enum_radius: f64,
}

fn canonical_sign(g: &Sl2Element) -> Sl2Element {
    let lead = if g.a.abs() > 1e-9 { g.a } else if g.b.abs() > 1e-9 { g.b } else { g.c };
    if lead < 0.0 {
        g.neg()
    } else {
        *g
    }
}

type MatKey = (i64, i64, i64, i64);

/// Two quantization keys on offset grids. Matrices within 0.25/KEY_SCALE of
/// each other (mod sign) agree on at least one of the two keys, so dedup by
/// either key tolerates the floating drift of word products; distinct lattice
/// elements differ by orders of magnitude more than the grid.
const KEY_SCALE: f64 = 1e6;

fn keys_of(g: &Sl2Element) -> [MatKey; 2] {
    let c = canonical_sign(g);
    let k = |off: f64| {
        (
            (c.a * KEY_SCALE + off).round() as i64,
            (c.b * KEY_SCALE + off).round() as i64,
            (c.c * KEY_SCALE + off).round() as i64,
            (c.d * KEY_SCALE + off).round() as i64,
        )
    };
    [k(0.0), k(0.5)]
}

impl FuchsianGroup {
    /// Parse the JSON group file: generators as row-major decimal strings plus
    /// the relator word. Verifies determinants, hyperbolicity (|tr| > 2) and
    /// that the relator evaluates to +-identity within 1e-9, then enumerates
    /// the element shell used by periodized observables.
    pub fn from_json(text: &str, enum_radius: f64) -> Result<Self> {
        let file: GroupFile = serde_json::from_str(text)
            .map_err(|e| CoreError::InvalidInput(format!("group file parse error: {e}")))?;
        let mut gens = Vec::new();
        for m in &file.generators {
            let parse = |s: &String| {
                s.parse::<f64>()
                    .map_err(|e| CoreError::InvalidInput(format!("bad matrix entry {s}: {e}")))
            };
            let g = Sl2Element::new(parse(&m[0][0])?, parse(&m[0][1])?, parse(&m[1][0])?, parse(&m[1][1])?)?;
            if (g.det() - 1.0).abs() > 1e-12 {
                return Err(CoreError::InvalidInput("generator determinant drifts from 1".into()));
            }
            if g.trace().abs() <= 2.0 {
                return Err(CoreError::InvalidInput(format!(
                    "generator trace {} is not hyperbolic",
                    g.trace()
                )));
            }
            gens.push(g);
        }
        if gens.is_empty() {
            return Err(CoreError::InvalidInput("group file has no generators".into()));
        }
        let mut rel = Sl2Element::identity();
        for &i in &file.relator {
            let g = gens
                .get(i)
                .ok_or_else(|| CoreError::InvalidInput(format!("relator index {i} out of range")))?;
            rel = rel.mul(g);
        }
        if rel.dist_mod_sign(&Sl2Element::identity()) > 1e-9 {
            return Err(CoreError::InvalidInput(
                "relator word does not evaluate to +-identity within 1e-9".into(),
            ));
        }
        let mut grp = FuchsianGroup {
            name: if file.name.is_empty() { "unnamed".into() } else { file.name },
            gens,
            relator: file.relator,
            shell: Vec::new(),
            enum_radius,
        };
        grp.shell = grp.enumerate(enum_radius);
        Ok(grp)
    }

    /// The Bolza octagon group shipped with the crate (enumeration cached
    /// process-wide; the first call pays for it).
    pub fn bolza() -> Self {
        static BOLZA: OnceLock<FuchsianGroup> = OnceLock::new();
        BOLZA
            .get_or_init(|| {
                FuchsianGroup::from_json(include_str!("../data/bolza.json"), 8.5)
                    .expect("embedded bolza.json is valid")
            })
            .clone()
    }

    pub fn generators(&self) -> &[Sl2Element] {
        &self.gens
    }

    pub fn relator(&self) -> &[usize] {
        &self.relator
    }

    pub fn enum_radius(&self) -> f64 {
        self.enum_radius
    }

    fn displacement(g: &Sl2Element) -> f64 {
        let z = moebius(g, &UpperHalfPoint::I).expect("group element acts on i");
        hyperbolic_distance(&z, &UpperHalfPoint::I)
    }

    /// Breadth-first enumeration of sign-canonicalized elements with
    /// displacement <= radius. Breadth-first order keeps word lengths (and so
    /// the floating drift of the products) minimal, which the key-based
    /// dedup depends on; exploration overshoots by ENUM_SLACK so chains that
    /// leave the target ball and come back are not cut off.
    fn enumerate(&self, radius: f64) -> Vec<(Sl2Element, f64)> {
        let explore = radius + ENUM_SLACK;
        let mut index: HashMap<MatKey, u32> = HashMap::new();
        let mut elements: Vec<(Sl2Element, f64)> = Vec::new();
        let id = Sl2Element::identity();
        for k in keys_of(&id) {
            index.insert(k, 0);
        }
        elements.push((id, 0.0));
        let mut queue: VecDeque<u32> = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            let g = elements[i as usize].0;
            for gen in &self.gens {
                let ng = canonical_sign(&gen.mul(&g));
                let keys = keys_of(&ng);
                if keys.iter().any(|k| index.contains_key(k)) {
                    continue;
                }
                let d = Self::displacement(&ng);
                if d > explore {
                    continue;
                }
                let idx = elements.len() as u32;
                elements.push((ng, d));
                for k in keys {
                    index.insert(k, idx);
                }
                queue.push_back(idx);
            }
        }
        let mut shell: Vec<(Sl2Element, f64)> =
            elements.into_iter().filter(|(_, d)| *d <= radius).collect();
        shell.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        shell
    }

    /// Elements with displacement <= r (requires r <= enum_radius).
    pub fn shell(&self, r: f64) -> &[(Sl2Element, f64)] {
        let end = self.shell.partition_point(|(_, d)| *d <= r);
        &self.shell[..end]
    }

    /// Greedy Dirichlet reduction: left-multiply by whichever generator
    /// strictly decreases d(g i, i) until none does.
    pub fn reduce(&self, g: &Sl2Element) -> Result<ReducedPoint> {
        let mut cur = *g;
        let mut word = Vec::new();
        let mut dist = Self::displacement(&cur);
        for _ in 0..REDUCTION_STEP_CAP {
            let mut best: Option<(usize, Sl2Element, f64)> = None;
            for (i, gen) in self.gens.iter().enumerate() {
                let cand = gen.mul(&cur);
                let d = Self::displacement(&cand);
                if d < dist - 1e-12 && best.as_ref().map_or(true, |(_, _, bd)| d < *bd) {
                    best = Some((i, cand, d));
                }
            }
            match best {
                Some((i, cand, d)) => {
                    cur = cand;
                    dist = d;
                    word.push(i);
                }
                None => return Ok(ReducedPoint { element: cur, word }),
            }
        }
        Err(CoreError::NonTermination(REDUCTION_STEP_CAP))
    }
}

/// Coset representative with base point in the Dirichlet domain, together
/// with the generator word that was applied.
#[derive(Clone, Debug)]
pub struct ReducedPoint {
    pub element: Sl2Element,
    pub word: Vec<usize>,
}

impl ReducedPoint {
    pub fn base_point(&self) -> UpperHalfPoint {
        moebius(&self.element, &UpperHalfPoint::I).expect("reduced element acts on i")
    }
}

/// Smooth compactly supported bump on SL(2,R) in Iwasawa coordinates:
/// Gaussian in ((x-x0)/w, ln(y/y0)/w, chordal fiber distance / fiber_width),
/// truncated by a C-infinity cutoff at `cutoff` Gaussian widths.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BumpSpec {
    pub center: [f64; 3],
    pub width: f64,
    pub fiber_width: f64,
    pub cutoff: f64,
    pub amplitude: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        BumpSpec { center: [0.0, 1.0, 0.0], width: 0.6, fiber_width: 0.8, cutoff: 5.0, amplitude: 1.0 }
    }
}

impl BumpSpec {
    /// Support radius in the base (x, ln y) coordinates.
    pub fn base_support_radius(&self) -> f64 {
        self.width * self.cutoff
    }

    fn eval_rho2(&self, x: crate::jet::Jet, y: crate::jet::Jet, th: crate::jet::Jet) -> crate::jet::Jet {
        let u = (x - crate::jet::Jet::constant(self.center[0])) * (1.0 / self.width);
        let v = ((y * (1.0 / self.center[1])).ln()) * (1.0 / self.width);
        let ph = ((th - crate::jet::Jet::constant(self.center[2])) * 0.5).sin() * (2.0 / self.fiber_width);
        u * u + v * v + ph * ph
    }

    fn profile(&self, rho2: crate::jet::Jet) -> crate::jet::Jet {
        let c2 = self.cutoff * self.cutoff;
        if rho2.v >= c2 {
            return crate::jet::Jet::constant(0.0);
        }
        // exp(-rho^2) * exp(1 - 1/(1 - rho^2/c^2))
        let s2 = rho2 * (1.0 / c2);
        let cut = ((crate::jet::Jet::constant(1.0) - s2).recip() * -1.0 + 1.0).exp();
        (-rho2).exp() * cut * self.amplitude
    }

    pub fn eval_real(&self, g: &Sl2Element) -> f64 {
        let (x, y, th) = iwasawa(g);
        let rho2 = self.eval_rho2(
            crate::jet::Jet::constant(x),
            crate::jet::Jet::constant(y),
            crate::jet::Jet::constant(th),
        );
        self.profile(rho2).v
    }

    pub fn eval_jet_real(&self, g: &Sl2Element, dir: &LieVector) -> crate::jet::Jet {
        let jets = entry_jets(g, dir);
        let (x, y, th) = iwasawa_jets(&jets);
        self.profile(self.eval_rho2(x, y, th))
    }
}

impl SmoothObservable for BumpSpec {
    fn eval(&self, g: &Sl2Element) -> Complex64 {
        Complex64::new(self.eval_real(g), 0.0)
    }

    fn eval_jet(&self, g: &Sl2Element, dir: &LieVector) -> JetC {
        JetC::from_real(self.eval_jet_real(g, dir))
    }
}

/// Truncated Gamma-periodization of a bump: f(g) = sum over the enumerated
/// shell (both matrix signs) of psi(gamma g). Gamma-invariant by construction
/// up to the shell truncation.
#[derive(Clone, Debug)]
pub struct BundleObservable {
    pub bump: BumpSpec,
    pub shell_radius: f64,
    group: FuchsianGroup,
    /// Support box in base coordinates (x_lo, x_hi, y_lo, y_hi): terms whose
    /// base point falls outside contribute exactly zero and are skipped.
    gate: (f64, f64, f64, f64),
}

impl BundleObservable {
    pub fn new(bump: BumpSpec, group: &FuchsianGroup, shell_radius: f64) -> Result<Self> {
        if shell_radius > group.enum_radius() {
            return Err(CoreError::InvalidInput(format!(
                "shell radius {shell_radius} exceeds the enumerated radius {}",
                group.enum_radius()
            )));
        }
        let r = bump.base_support_radius();
        let gate = (
            bump.center[0] - r,
            bump.center[0] + r,
            bump.center[1] * (-r).exp(),
            bump.center[1] * r.exp(),
        );
        Ok(BundleObservable { bump, shell_radius, group: group.clone(), gate })
    }

    #[inline]
    fn passes_gate(&self, h: &Sl2Element) -> bool {
        // base point of h (and of -h: identical) without transcendentals
        let den = h.c * h.c + h.d * h.d;
        let y = 1.0 / den;
        if y < self.gate.2 || y > self.gate.3 {
            return false;
        }
        let x = (h.b * h.d + h.a * h.c) * y;
        x >= self.gate.0 && x <= self.gate.1
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.group
    }

    /// Integral of f over Y by unfolding: int_SL2 psi dHaar / vol(Y), with
    /// dHaar = dx dy dtheta / y^2 and vol = (hyperbolic area) * pi for a
    /// lattice containing -I. The area comes from Gauss-Bonnet via the
    /// relator length (2g sides pair into a 4g-gon): for the Bolza octagon
    /// the area is 4 pi.
    pub fn mean_by_unfolding(&self, area: f64) -> f64 {
        let b = &self.bump;
        let rule = crate::quad::GlRule::new(48);
        let rx = b.base_support_radius();
        let x0 = b.center[0];
        let ly0 = b.center[1].ln();
        // theta integral over one full period
        let total = rule.integrate(x0 - rx, x0 + rx, |x| {
            rule.integrate(ly0 - rx, ly0 + rx, |ly| {
                let y = ly.exp();
                let inner = rule.integrate(0.0, std::f64::consts::TAU, |th| {
                    let g = from_iwasawa(x, y, th);
                    b.eval_real(&g)
                });
                // dx dy/y^2 = dx d(ln y)/y
                inner / y
            })
        });
        total / (area * std::f64::consts::PI)
    }
}

/// Build n(x) a(y) k(theta).
pub fn from_iwasawa(x: f64, y: f64, theta: f64) -> Sl2Element {
    let sy = y.sqrt();
    let (s, c) = theta.sin_cos();
    // [[1, x],[0,1]] * [[sy, 0],[0, 1/sy]] * [[c, s],[-s, c]]
    Sl2Element {
        a: sy * c - x / sy * s,
        b: sy * s + x / sy * c,
        c: -s / sy,
        d: c / sy,
    }
    .renormalized()
}

impl SmoothObservable for BundleObservable {
    fn eval(&self, g: &Sl2Element) -> Complex64 {
        let mut acc = 0.0;
        for (gamma, _) in self.group.shell(self.shell_radius) {
            let h = gamma.mul(g);
            if !self.passes_gate(&h) {
                continue;
            }
            acc += self.bump.eval_real(&h);
            acc += self.bump.eval_real(&h.neg());
        }
        Complex64::new(acc, 0.0)
    }

    fn eval_jet(&self, g: &Sl2Element, dir: &LieVector) -> JetC {
        let mut acc = crate::jet::Jet::constant(0.0);
        for (gamma, _) in self.group.shell(self.shell_radius) {
            let h = gamma.mul(g);
            if !self.passes_gate(&h) {
                continue;
            }
            acc = acc + self.bump.eval_jet_real(&h, dir);
            acc = acc + self.bump.eval_jet_real(&h.neg(), dir);
        }
        JetC::from_real(acc)
    }
}

/// Points of the geodesic circle of radius t through the fiber of q:
/// reduce(q exp(s Theta) exp(t X)) for each s, with reduction interleaved
/// every unit of geodesic time so matrix entries stay bounded.
pub fn geodesic_circle_points(
    grp: &FuchsianGroup,
    q: &Sl2Element,
    t: f64,
    s_grid: &[f64],
) -> Result<Vec<ReducedPoint>> {
    if t < 0.0 {
        return Err(CoreError::InvalidInput("geodesic radius must be nonnegative".into()));
    }
    let steps = t.ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let flow = exp_lie(&LieVector::X, dt);
    s_grid
        .iter()
        .map(|&s| {
            let mut cur = grp.reduce(&q.mul(&exp_lie(&LieVector::THETA, s)))?;
            for _ in 0..steps {
                cur = grp.reduce(&cur.element.mul(&flow))?;
            }
            Ok(cur)
        })
        .collect()
}

/// Exact Haar sampling on Y: hyperbolic-polar rejection into the Dirichlet
/// domain for the base point, uniform fiber angle.
pub fn haar_samples(grp: &FuchsianGroup, n: usize, seed: u64) -> Vec<Sl2Element> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = grp
        .generators()
        .iter()
        .map(FuchsianGroup::displacement)
        .fold(0.0, f64::max);
    let cosh_max = r_max.cosh();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // hyperbolic area element: cosh(rho) uniform
        let x: f64 = rng.gen_range(1.0..cosh_max);
        let rho = x.acosh();
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        // disk point -> upper half plane (Cayley centered at i)
        let w = ((rho * 0.5).tanh() * phi.cos(), (rho * 0.5).tanh() * phi.sin());
        let den = (1.0 - w.0) * (1.0 - w.0) + w.1 * w.1;
        let z = UpperHalfPoint::new(
            2.0 * w.1 / den,
            (1.0 - w.0 * w.0 - w.1 * w.1) / den,
        )
        .expect("disk interior maps into the upper half plane");
        // Dirichlet membership: no generator moves z closer to i
        let d0 = hyperbolic_distance(&z, &UpperHalfPoint::I);
        let inside = grp.generators().iter().all(|g| {
            let gz = moebius(g, &z).expect("generator acts on H");
            hyperbolic_distance(&gz, &UpperHalfPoint::I) >= d0 - 1e-12
        });
        if !inside {
            continue;
        }
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        out.push(from_iwasawa(z.x, z.y, theta));
    }
    out
}

/// Partition of (Dirichlet domain) x (fiber): radial and angular bins in the
/// disk model, fiber bins over theta mod pi.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CellPartition {
    pub r_bins: usize,
    pub phi_bins: usize,
    pub theta_bins: usize,
    pub r_max: f64,
}

impl CellPartition {
    pub fn n_cells(&self) -> usize {
        self.r_bins * self.phi_bins * self.theta_bins
    }

    pub fn cell_of(&self, g: &Sl2Element) -> usize {
        let (x, y, theta) = iwasawa(g);
        let z = UpperHalfPoint::new(x, y).expect("iwasawa y > 0");
        let d = hyperbolic_distance(&z, &UpperHalfPoint::I);
        // disk angle of the Cayley image
        let num = (x, y - 1.0);
        let den = (x, y + 1.0);
        let dn = den.0 * den.0 + den.1 * den.1;
        let w = ((num.0 * den.0 + num.1 * den.1) / dn, (num.1 * den.0 - num.0 * den.1) / dn);
        let phi = w.1.atan2(w.0).rem_euclid(std::f64::consts::TAU);
        let th = theta.rem_euclid(std::f64::consts::PI);
        let ri = ((d / self.r_max) * self.r_bins as f64).min(self.r_bins as f64 - 1.0) as usize;
        let pi_ = ((phi / std::f64::consts::TAU) * self.phi_bins as f64)
            .min(self.phi_bins as f64 - 1.0) as usize;
        let ti = ((th / std::f64::consts::PI) * self.theta_bins as f64)
            .min(self.theta_bins as f64 - 1.0) as usize;
        (ri * self.phi_bins + pi_) * self.theta_bins + ti
    }
}

/// Normalized cell-occupancy histogram.
pub fn histogram(part: &CellPartition, pts: &[Sl2Element]) -> Vec<f64> {
    let mut h = vec![0.0; part.n_cells()];
    for g in pts {
        h[part.cell_of(g)] += 1.0;
    }
    for v in &mut h {
        *v /= pts.len() as f64;
    }
    h
}

/// Invariant cell masses by Monte Carlo over exact Haar samples.
pub fn cell_masses(grp: &FuchsianGroup, part: &CellPartition, n: usize, seed: u64) -> Vec<f64> {
    histogram(part, &haar_samples(grp, n, seed))
}

pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
