//! Morrey and Lorentz norms, oscillation-decay Hölder estimates, the
//! div–curl pairing ratio and the ε-regularity probe.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{curl2, grad, DiscGrid};
use crate::pseudosphere::{self, BoundaryData, DiscMap, SolverConfig};
use crate::report::least_squares_slope;
use crate::signature::QuadricSpec;

/// Balls `B_R(x)` inside a disc of radius `domain_radius` about the origin.
#[derive(Debug, Clone)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
    pub descriptor: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl BallFamily {
    /// Centres at every 4th lattice node in both directions plus the node
    /// nearest the origin; dyadic radii `2^{-k} R_max(x)` with
    /// `R_max(x) = domain_radius - |x|`, down to `4h`.
    pub fn dyadic(grid: &DiscGrid, domain_radius: f64) -> Result<Self> {
        Self::dyadic_with_stride(grid, domain_radius, 4)
    }

    pub fn dyadic_with_stride(grid: &DiscGrid, domain_radius: f64, stride: usize) -> Result<Self> {
        let rmin = 4.0 * grid.h();
        let mut centers: Vec<[f64; 2]> = vec![grid.pos(grid.nearest([0.0, 0.0]))];
        for row in grid.rows() {
            let j = grid.column_floor(row.y);
            if j.rem_euclid(stride as i64) != 0 {
                continue;
            }
            for k in 0..row.len {
                if (row.i0 as usize + k) % stride == 0 {
                    centers.push(grid.pos(row.start + k));
                }
            }
        }
        let mut balls = Vec::new();
        for c in centers {
            let rmax = domain_radius - c[0].hypot(c[1]);
            let mut r = rmax;
            while r >= rmin - 1e-12 {
                balls.push(Ball { center: c, radius: r });
                r *= 0.5;
            }
        }
        if balls.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(Self {
            balls,
            descriptor: format!("dyadic(stride={stride}, domain_radius={domain_radius}, rmin=4h)"),
        })
    }

    pub fn from_balls(balls: Vec<Ball>, descriptor: &str) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(Self {
            balls,
            descriptor: descriptor.to_string(),
        })
    }
}

/// Nodal sums over discs via per-row prefix sums.
pub struct BallSummer<'g> {
    grid: &'g DiscGrid,
    prefix: Vec<f64>,
}

impl<'g> BallSummer<'g> {
    pub fn new(grid: &'g DiscGrid, values: &[f64]) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        let mut s = 0.0;
        for v in values {
            s += v;
            prefix.push(s);
        }
        Self { grid, prefix }
    }

    /// Node id ranges (inclusive start, exclusive end) of each row inside the ball.
    pub fn ranges(grid: &DiscGrid, b: &Ball) -> Vec<(usize, usize)> {
        let rows = grid.rows();
        let [xc, yc] = b.center;
        let r2 = b.radius * b.radius * (1.0 + 1e-12);
        let first = rows.partition_point(|row| row.y < yc - b.radius - 1e-12);
        let mut out = Vec::new();
        for row in &rows[first..] {
            let dy = row.y - yc;
            if dy > b.radius + 1e-12 {
                break;
            }
            let s2 = r2 - dy * dy;
            if s2 < 0.0 {
                continue;
            }
            let s = s2.sqrt();
            let mut lo = grid.column_floor(xc - s);
            if grid.column_x(lo) < xc - s - 1e-12 {
                lo += 1;
            }
            let hi = grid.column_floor(xc + s);
            let lo = lo.max(row.i0 as i64);
            let hi = hi.min(row.i0 as i64 + row.len as i64 - 1);
            if hi < lo {
                continue;
            }
            let a = row.start + (lo - row.i0 as i64) as usize;
            let e = row.start + (hi - row.i0 as i64) as usize + 1;
            out.push((a, e));
        }
        out
    }

    pub fn sum(&self, b: &Ball) -> f64 {
        Self::ranges(self.grid, b)
            .into_iter()
            .map(|(a, e)| self.prefix[e] - self.prefix[a])
            .sum()
    }
}

/// Outcome of a norm evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    /// maximising ball (Morrey) or `None`
    pub argmax: Option<Ball>,
    pub p: f64,
    pub family: String,
}

/// Pointwise Euclidean magnitude across components.
pub fn magnitude(comps: &[&[f64]]) -> Vec<f64> {
    let n = comps.first().map_or(0, |c| c.len());
    (0..n)
        .map(|p| comps.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
        .collect()
}

/// `(R^{p-2} Σ_{B_R(x)} w |f|^p)^{1/p}` for one ball.
pub fn ball_value(grid: &DiscGrid, f: &[&[f64]], p: f64, b: &Ball) -> f64 {
    let density: Vec<f64> = magnitude(f)
        .iter()
        .zip(grid.weights())
        .map(|(m, w)| w * m.powf(p))
        .collect();
    let s = BallSummer::new(grid, &density).sum(b);
    (b.radius.powf(p - 2.0) * s).powf(1.0 / p)
}

/// Discrete Morrey norm `sup_B (R^{p-2} ∫_B |f|^p)^{1/p}` over the family.
pub fn morrey_norm(grid: &DiscGrid, f: &[&[f64]], p: f64, fam: &BallFamily) -> Result<NormReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("Morrey exponent must be >= 1, got {p}")));
    }
    if fam.balls.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let density: Vec<f64> = magnitude(f)
        .iter()
        .zip(grid.weights())
        .map(|(m, w)| w * m.powf(p))
        .collect();
    let summer = BallSummer::new(grid, &density);
    let mut best = (f64::NEG_INFINITY, fam.balls[0]);
    for b in &fam.balls {
        let v = b.radius.powf(p - 2.0) * summer.sum(b);
        if v > best.0 {
            best = (v, *b);
        }
    }
    Ok(NormReport {
        value: best.0.max(0.0).powf(1.0 / p),
        argmax: Some(best.1),
        p,
        family: fam.descriptor.clone(),
    })
}

/// Default lower bound of the measure parameter `t` in [`lorentz_2inf`]:
/// the area of a disc of radius `16h`.
pub fn default_lorentz_floor(h: f64) -> f64 {
    std::f64::consts::PI * (16.0 * h).powi(2)
}

/// `sup_t t^{1/2} f*(t)` of the decreasing rearrangement, over breakpoints
/// with cumulative measure `t ≥ floor` (`None` uses [`default_lorentz_floor`]).
///
/// Below a few cells the rearrangement of a grid function is dominated by
/// single nodal values, so the supremum is taken above a resolution floor.
pub fn lorentz_2inf(grid: &DiscGrid, f: &[&[f64]], floor: Option<f64>) -> NormReport {
    let floor = floor.unwrap_or_else(|| default_lorentz_floor(grid.h()));
    let mag = magnitude(f);
    let mut order: Vec<usize> = (0..mag.len()).collect();
    order.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
    let mut t = 0.0;
    let mut best = 0.0f64;
    let mut last = 0.0;
    for &p in &order {
        t += grid.weight(p);
        last = t.sqrt() * mag[p];
        if t >= floor {
            best = best.max(last);
        }
    }
    // a floor above the total measure falls back to the final breakpoint
    if t < floor {
        best = last;
    }
    NormReport {
        value: best,
        argmax: None,
        p: 2.0,
        family: format!("rearrangement(floor={floor:e})"),
    }
}

/// `morrey_norm(f, p) / lorentz_2inf(f)`.
pub fn lorentz_morrey_check(grid: &DiscGrid, f: &[&[f64]], p: f64, fam: &BallFamily) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidInput(format!("need 1 < p < 2, got {p}")));
    }
    let m = morrey_norm(grid, f, p, fam)?.value;
    let l = lorentz_2inf(grid, f, None).value;
    if l == 0.0 {
        return Err(Error::ZeroDenominator("Lorentz norm"));
    }
    Ok(m / l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    /// minimum slope over the centres
    pub alpha: f64,
    pub per_center: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderOptions {
    /// Largest radius; `None` uses the distance to the unit circle.
    pub r_max: Option<f64>,
    pub min_radii: usize,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            r_max: None,
            min_radii: 3,
        }
    }
}

/// Oscillation (largest component-wise max − min) over a ball.
pub fn oscillation(grid: &DiscGrid, comps: &[&[f64]], b: &Ball) -> f64 {
    let ranges = BallSummer::ranges(grid, b);
    comps
        .iter()
        .map(|c| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(a, e) in &ranges {
                for &v in &c[a..e] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi >= lo {
                hi - lo
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log osc(B_r(x))` against `log r` over dyadic
/// radii `≥ 4h`, minimised over the given centre nodes.
pub fn holder_exponent(
    grid: &DiscGrid,
    u: &[&[f64]],
    centers: &[usize],
    opts: HolderOptions,
) -> Result<HolderEstimate> {
    if centers.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let rmin = 4.0 * grid.h();
    let mut per_center = Vec::with_capacity(centers.len());
    for &c in centers {
        let x = grid.pos(c);
        let mut r = opts.r_max.unwrap_or(1.0 - x[0].hypot(x[1]));
        let (mut lr, mut lo) = (Vec::new(), Vec::new());
        while r >= rmin - 1e-12 {
            let osc = oscillation(grid, u, &Ball { center: x, radius: r });
            if osc <= 0.0 {
                return Err(Error::ZeroDenominator("oscillation"));
            }
            lr.push(r.ln());
            lo.push(osc.ln());
            r *= 0.5;
        }
        if lr.len() < opts.min_radii {
            return Err(Error::InsufficientRadii {
                center: c,
                count: lr.len(),
                needed: opts.min_radii,
            });
        }
        per_center.push((c, least_squares_slope(&lr, &lo)));
    }
    let alpha = per_center.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    Ok(HolderEstimate { alpha, per_center })
}

/// `|∫ (∇f · curl g) h| / (‖∇f‖₂ ‖curl g‖₂ ‖∇h‖_{M²₂})`.
///
/// A vanishing Morrey factor (constant `h`) reports 0.
pub fn div_curl_ratio(grid: &DiscGrid, f: &[f64], g: &[f64], hfun: &[f64], fam: &BallFamily) -> Result<f64> {
    let n = grid.len();
    let boundary_zero = |v: &[f64]| grid.boundary_nodes().all(|p| v[p] == 0.0);
    if !boundary_zero(f) && !boundary_zero(g) {
        return Err(Error::InvalidInput("f or g must vanish on boundary nodes".into()));
    }
    let [fx, fy] = grad(grid, f);
    let [cx, cy] = curl2(grid, g);
    let [hx, hy] = grad(grid, hfun);
    let morrey = morrey_norm(grid, &[&hx, &hy], 2.0, fam)?.value;
    if morrey == 0.0 {
        return Ok(0.0);
    }
    let integrand: Vec<f64> = (0..n).map(|p| (fx[p] * cx[p] + fy[p] * cy[p]) * hfun[p]).collect();
    let num = grid.integrate(&integrand).abs();
    let den = grid.l2_norm(&[&fx, &fy]) * grid.l2_norm(&[&cx, &cy]) * morrey;
    if den == 0.0 {
        return Err(Error::ZeroDenominator("div-curl ratio"));
    }
    Ok(num / den)
}

/// Target of an ε-probe sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeTarget {
    Pseudosphere {
        n: usize,
        nu: usize,
    },
    /// Solved through the anti-isometry.
    Pseudohyperbolic {
        n: usize,
        nu: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub s: f64,
    pub morrey_p: f64,
    pub holder_alpha: Option<f64>,
    pub el_residual: f64,
    pub status: String,
}

/// Centres used by the probe's Hölder estimate: the origin and four points
/// at radius 0.3.
pub fn probe_centers(grid: &DiscGrid) -> Vec<usize> {
    [[0.0, 0.0], [0.3, 0.0], [-0.3, 0.0], [0.0, 0.3], [0.0, -0.3]]
        .iter()
        .map(|&c| grid.nearest(c))
        .collect()
}

/// Sweeps cap boundary data of amplitude `s` and tabulates
/// `(s, ‖∇u‖_{M^p_p}, α̂, EL residual, status)`.
///
/// The amplitude at which α̂ degrades is an empirical transition of this
/// discretisation; it is not an estimate of any theoretical threshold.
pub fn epsilon_probe(
    grid: &Arc<DiscGrid>,
    target: ProbeTarget,
    amplitudes: &[f64],
    p: f64,
    cfg: &SolverConfig,
) -> Result<Vec<ProbeRow>> {
    let fam = BallFamily::dyadic(grid, 1.0)?;
    let centers = probe_centers(grid);
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &s in amplitudes {
        let g = BoundaryData::Cap { amplitude: s };
        let solved = match target {
            ProbeTarget::Pseudosphere { n, nu } => {
                pseudosphere::solve(&g, grid, &QuadricSpec::pseudosphere(n, nu)?, cfg)
            }
            ProbeTarget::Pseudohyperbolic { n, nu } => pseudosphere::solve_pseudohyperbolic(&g, grid, n, nu, cfg),
        };
        let row = match solved {
            Ok((u, rep)) => probe_row(grid, &u, s, p, &fam, &centers, rep.residual, "converged")?,
            Err(Error::NonConvergence { residual, .. }) => ProbeRow {
                s,
                morrey_p: f64::NAN,
                holder_alpha: None,
                el_residual: residual,
                status: "non_convergence".into(),
            },
            Err(Error::NullConeViolation { .. }) => ProbeRow {
                s,
                morrey_p: f64::NAN,
                holder_alpha: None,
                el_residual: f64::NAN,
                status: "null_cone".into(),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn probe_row(
    grid: &DiscGrid,
    u: &DiscMap,
    s: f64,
    p: f64,
    fam: &BallFamily,
    centers: &[usize],
    residual: f64,
    status: &str,
) -> Result<ProbeRow> {
    let grads = u.gradients();
    let refs: Vec<&[f64]> = grads.iter().flat_map(|[a, b]| [a.as_slice(), b.as_slice()]).collect();
    let morrey_p = morrey_norm(grid, &refs, p, fam)?.value;
    let comps: Vec<&[f64]> = u.comps().iter().map(Vec::as_slice).collect();
    let (holder_alpha, status) = match holder_exponent(grid, &comps, centers, HolderOptions::default()) {
        Ok(h) => (Some(h.alpha), status.to_string()),
        Err(Error::ZeroDenominator(_)) => (None, "degenerate".to_string()),
        Err(e) => return Err(e),
    };
    Ok(ProbeRow {
        s,
        morrey_p,
        holder_alpha,
        el_residual: residual,
        status,
    })
}

/// CSV with header `s,morrey_p,holder_alpha,el_residual,status`.
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from("s,morrey_p,holder_alpha,el_residual,status\n");
    for r in rows {
        let alpha = r.holder_alpha.map_or_else(|| "nan".to_string(), |a| a.to_string());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.s, r.morrey_p, alpha, r.el_residual, r.status
        ));
    }
    out
}
