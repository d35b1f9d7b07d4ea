//! Truncation of a univariate ReLU network to `[-M, M]`.
//!
//! Two constructions are available:
//!
//! - `SlopeCorrection` follows the classical argument: interpolant `p`,
//!   tent `q(x) = M - sigma(x) - sigma(-x)`, a slope correction `alpha`
//!   making `phi - p + alpha q` positive inside and negative outside, then
//!   boundary ramps. `alpha` is read off the finitely many breakpoints and the
//!   asymptotic slopes, so this route needs an enumerable network.
//! - `InputClamp` evaluates `phi` on `clamp(x, -M+delta, M-delta)` and
//!   subtracts two ramps that reach the clamped boundary values at
//!   `M - delta/8`. It needs no breakpoint information and is used for the
//!   deep emulators, whose piece counts are astronomically large.
//!
//! Both give `psi = phi` on `[-M+delta, M-delta]`, `psi = 0` exactly (bitwise)
//! outside `[-M, M]`, and `sup |psi| <= sup |phi|` on `[-M, M]`.

use super::{linear_regions, pad_depth, AffineLayer, Activation, SparseNetwork};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationRoute {
    /// Slope correction when the network has at most this many pieces, else clamp.
    Auto,
    SlopeCorrection,
    InputClamp,
}

const AUTO_PIECE_CAP: usize = 20_000;

#[derive(Clone, Debug)]
pub struct Truncation {
    pub net: SparseNetwork,
    pub route: TruncationRoute,
    /// Band width actually used.
    pub delta: f64,
    /// Slope correction (slope-correction route only).
    pub alpha: Option<f64>,
    /// Realized `C` in `size <= C (1 + size(phi))`, `depth <= C (1 + depth(phi))`.
    pub constant: f64,
}

pub fn truncate_outside_interval(
    net: &SparseNetwork,
    m: f64,
    delta: Option<f64>,
    route: TruncationRoute,
) -> Result<Truncation> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(Error::InvalidArgument("truncation needs a univariate network".into()));
    }
    if net.depth() > 0 && net.activation() != Activation::Relu {
        return Err(Error::InvalidArgument("truncation needs a ReLU network".into()));
    }
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("M must be positive, got {m}")));
    }
    if let Some(d) = delta {
        if !(d > 0.0 && d < m) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, M), got {d} with M = {m}")));
        }
    }
    let out = match route {
        TruncationRoute::InputClamp => clamp_route(net, m, delta.unwrap_or(m / 2.0))?,
        TruncationRoute::SlopeCorrection => slope_route(net, m, delta, usize::MAX)?,
        TruncationRoute::Auto => match slope_route(net, m, delta, AUTO_PIECE_CAP) {
            Ok(t) => t,
            Err(Error::Numerical(_)) => clamp_route(net, m, delta.unwrap_or(m / 2.0))?,
            Err(e) => return Err(e),
        },
    };
    Ok(out)
}

fn realized_constant(psi: &SparseNetwork, phi: &SparseNetwork) -> f64 {
    let s = psi.size() as f64 / (1.0 + phi.size() as f64);
    let d = psi.depth() as f64 / (1.0 + phi.depth() as f64);
    s.max(d)
}

/// Layer builder helper: rows appended with explicit triplets.
struct LayerBuf {
    cols: usize,
    trips: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

impl LayerBuf {
    fn new(cols: usize) -> Self {
        LayerBuf { cols, trips: vec![], bias: vec![] }
    }
    fn row(&mut self, entries: &[(usize, f64)], b: f64) -> usize {
        let r = self.bias.len();
        for &(c, w) in entries {
            self.trips.push((r, c, w));
        }
        self.bias.push(b);
        r
    }
    fn rows(&self) -> usize {
        self.bias.len()
    }
    fn finish(self) -> Result<AffineLayer> {
        let rows = self.bias.len();
        AffineLayer::from_triplets(rows, self.cols, self.trips, self.bias)
    }
}

fn clamp_route(phi_in: &SparseNetwork, m: f64, delta: f64) -> Result<Truncation> {
    let phi = if phi_in.depth() == 0 { pad_depth(&as_relu(phi_in), 1)? } else { phi_in.clone() };
    let d = phi.depth();
    let lo = -m + delta;
    let hi = m - delta;
    let a = m - delta;
    let b = m - delta / 8.0;
    let inv = 1.0 / (b - a);

    // layer 0 (from x): u, ur, ul
    let mut l0 = LayerBuf::new(1);
    let u = l0.row(&[(0, 1.0)], -lo);
    let ur = l0.row(&[(0, inv)], -a * inv);
    let ul = l0.row(&[(0, -inv)], -a * inv);
    // layer 1: v = sigma((hi-lo) - u), vr = sigma(1 - ur), vl = sigma(1 - ul)
    let mut l1 = LayerBuf::new(l0.rows());
    let v = l1.row(&[(u, -1.0)], hi - lo);
    let vr = l1.row(&[(ur, -1.0)], 1.0);
    let vl = l1.row(&[(ul, -1.0)], 1.0);
    // layer 2: phi's first layer applied to c = hi - v, plus ramps sigma(1 - vr), sigma(1 - vl)
    let p0 = &phi.layers()[0];
    let w0 = p0.output_dim();
    let mut l2 = LayerBuf::new(l1.rows());
    for i in 0..w0 {
        let wv: f64 = p0.weights.row(i).map(|(_, w)| w).sum();
        let entries: Vec<(usize, f64)> = if wv != 0.0 { vec![(v, -wv)] } else { vec![] };
        l2.row(&entries, wv * hi + p0.bias[i]);
    }
    let mut rr = l2.row(&[(vr, -1.0)], 1.0);
    let mut rl = l2.row(&[(vl, -1.0)], 1.0);
    let mut layers = vec![l0.finish()?, l1.finish()?];
    let mut cur = l2;
    // phi's hidden layers 1..d-1, carrying the ramps
    for l in 1..d {
        let pl = &phi.layers()[l];
        let mut nb = LayerBuf::new(cur.rows());
        for i in 0..pl.output_dim() {
            let e: Vec<(usize, f64)> = pl.weights.row(i).collect();
            nb.row(&e, pl.bias[i]);
        }
        let nrr = nb.row(&[(rr, 1.0)], 0.0);
        let nrl = nb.row(&[(rl, 1.0)], 0.0);
        layers.push(std::mem::replace(&mut cur, nb).finish()?);
        rr = nrr;
        rl = nrl;
    }
    // the last hidden layer is `cur`; duplicate the ramp rows there so each
    // cancellation term has its own column
    let last = &phi.layers()[d];
    let (rr_trips, rr_bias) = row_of(&cur, rr);
    let (rl_trips, rl_bias) = row_of(&cur, rl);
    let rr2 = cur.row(&rr_trips, rr_bias);
    let rl2 = cur.row(&rl_trips, rl_bias);
    layers.push(cur.finish()?);

    let out_bias = last.bias[0];
    let phi_row: Vec<(usize, f64)> = last.weights.row(0).collect();
    let hidden = layers.last().unwrap().output_dim();
    let base_out = AffineLayer::from_triplets(1, hidden, phi_row.iter().map(|&(c, w)| (0, c, w)).collect(), vec![out_bias])?;
    let mut base_layers = layers.clone();
    base_layers.push(base_out);
    let base = SparseNetwork::new(base_layers, Activation::Relu)?;
    let (s_plus, _) = base.output_parts(&[m + 1.0])[0];
    let (s_minus, _) = base.output_parts(&[-m - 1.0])[0];

    let mut trips: Vec<(usize, usize, f64)> = phi_row.iter().map(|&(c, w)| (0, c, w)).collect();
    trips.push((0, rr, -s_plus));
    trips.push((0, rr2, -out_bias));
    trips.push((0, rl, -s_minus));
    trips.push((0, rl2, -out_bias));
    layers.push(AffineLayer::from_triplets(1, hidden, trips, vec![out_bias])?);
    let psi = SparseNetwork::new(layers, Activation::Relu)?;
    debug_assert_eq!(psi.eval1(m + 1.0), 0.0);
    let constant = realized_constant(&psi, phi_in);
    Ok(Truncation { net: psi, route: TruncationRoute::InputClamp, delta, alpha: None, constant })
}

fn row_of(buf: &LayerBuf, r: usize) -> (Vec<(usize, f64)>, f64) {
    let e = buf.trips.iter().filter(|t| t.0 == r).map(|t| (t.1, t.2)).collect();
    (e, buf.bias[r])
}

fn as_relu(net: &SparseNetwork) -> SparseNetwork {
    SparseNetwork::new(net.layers().to_vec(), Activation::Relu).unwrap()
}

fn slope_route(phi_in: &SparseNetwork, m: f64, delta: Option<f64>, cap: usize) -> Result<Truncation> {
    let phi = if phi_in.depth() == 0 { pad_depth(&as_relu(phi_in), 1)? } else { phi_in.clone() };
    let regions = linear_regions(&phi, cap)?;
    let f = |x: f64| phi.eval1(x);
    let slope_at = |x: f64, right: bool| -> f64 {
        // slope of the piece just right (or left) of x
        let k = if right {
            regions.points.partition_point(|&t| t <= x)
        } else {
            regions.points.partition_point(|&t| t < x)
        };
        regions.slopes[k]
    };
    let (fm, fp) = (f(-m), f(m));
    let p0 = 0.5 * (fp + fm);
    let p1 = (fp - fm) / (2.0 * m);
    let h = |x: f64| f(x) - p0 - p1 * x;
    let mut cand: Vec<f64> = Vec::new();
    for &bpt in &regions.points {
        if bpt > -m && bpt < m {
            cand.push(-h(bpt) / (m - bpt.abs()));
        } else if bpt > m {
            cand.push(h(bpt) / (bpt - m));
        } else if bpt < -m {
            cand.push(h(bpt) / (-m - bpt));
        }
    }
    cand.push(slope_at(m, false) - p1); // x -> M-
    cand.push(-(slope_at(-m, true) - p1)); // x -> -M+
    cand.push(slope_at(m, true) - p1); // x -> M+
    cand.push(-(slope_at(-m, false) - p1)); // x -> -M-
    cand.push(*regions.slopes.last().unwrap() - p1); // x -> +inf
    cand.push(-(regions.slopes[0] - p1)); // x -> -inf
    let alpha_star = cand.iter().cloned().fold(0.0f64, f64::max);
    let alpha = 1.0625 * alpha_star + 0.0625;

    // linear band: distance from +-M to the nearest interior breakpoint
    let mut lin = m;
    for &bpt in &regions.points {
        if bpt > -m && bpt < m {
            lin = lin.min(m - bpt).min(bpt + m);
        }
    }
    let delta_used = match delta {
        Some(d) => d.min(lin),
        None => 0.5 * lin,
    }
    .min(0.999 * m);
    let dl = delta_used;

    // k = p - alpha q - r - s as a sum of hats on knots -M, -M+dl, 0, M-dl, M
    let eta_outer = |x: f64| p0 + p1 * x - alpha * (m - x.abs()); // p - alpha q
    let knots = [-m, -m + dl, 0.0, m - dl, m];
    let kval = [0.0, eta_outer(-m + dl), eta_outer(0.0), eta_outer(m - dl), 0.0];

    let d = phi.depth();
    // hidden layer 0: phi's first layer, sigma(x), sigma(-x), and for each
    // interior hat: sigma(a - b), sigma(a), sigma(-a)
    let p0l = &phi.layers()[0];
    let mut l0 = LayerBuf::new(1);
    for i in 0..p0l.output_dim() {
        let e: Vec<(usize, f64)> = p0l.weights.row(i).collect();
        l0.row(&e, p0l.bias[i]);
    }
    let sx = l0.row(&[(0, 1.0)], 0.0);
    let snx = l0.row(&[(0, -1.0)], 0.0);
    let mut hat_units = Vec::new();
    for i in 1..4 {
        if kval[i] == 0.0 {
            continue;
        }
        let (xl, xc, xr) = (knots[i - 1], knots[i], knots[i + 1]);
        // a = (x - xl)/(xc - xl), b = (xr - x)/(xr - xc)
        let (ia, ib) = (1.0 / (xc - xl), 1.0 / (xr - xc));
        let amb = l0.row(&[(0, ia + ib)], -xl * ia - xr * ib);
        let ap = l0.row(&[(0, ia)], -xl * ia);
        let an = l0.row(&[(0, -ia)], xl * ia);
        hat_units.push((i, amb, ap, an));
    }
    let mut layers = vec![];
    let mut cur = l0;
    // carry (sx, snx) through phi's hidden layers; hats need two layers
    let mut carried_sx = sx;
    let mut carried_snx = snx;
    let mut hats: Vec<(usize, usize)> = Vec::new(); // (knot, unit index) once formed
    let mut pending = hat_units;
    for l in 1..=d {
        let pl = &phi.layers()[l];
        let mut nb = LayerBuf::new(cur.rows());
        if l < d {
            for i in 0..pl.output_dim() {
                let e: Vec<(usize, f64)> = pl.weights.row(i).collect();
                nb.row(&e, pl.bias[i]);
            }
            let a = nb.row(&[(carried_sx, 1.0)], 0.0);
            let b = nb.row(&[(carried_snx, 1.0)], 0.0);
            carried_sx = a;
            carried_snx = b;
        } else {
            // eta unit: sigma(phi(x) - p(x) + alpha q(x)), with x = sx - snx, |x| = sx + snx
            let mut e: Vec<(usize, f64)> = pl.weights.row(0).collect();
            e.push((carried_sx, -p1 - alpha));
            e.push((carried_snx, p1 - alpha));
            nb.row(&e, pl.bias[0] - p0 + alpha * m);
        }
        let mut next_hats = Vec::new();
        for &(k, u) in &hats {
            next_hats.push((k, nb.row(&[(u, 1.0)], 0.0)));
        }
        for &(k, amb, ap, an) in &pending {
            next_hats.push((k, nb.row(&[(ap, 1.0), (an, -1.0), (amb, -1.0)], 0.0)));
        }
        pending.clear();
        hats = next_hats;
        layers.push(std::mem::replace(&mut cur, nb).finish()?);
    }
    // `cur` is the last hidden layer: eta unit first, then hats
    let hidden = cur.rows();
    layers.push(cur.finish()?);
    let mut trips = vec![(0usize, 0usize, 1.0)];
    for &(k, u) in &hats {
        trips.push((0, u, kval[k]));
    }
    layers.push(AffineLayer::from_triplets(1, hidden, trips, vec![0.0])?);
    let psi = SparseNetwork::new(layers, Activation::Relu)?;
    let constant = realized_constant(&psi, phi_in);
    Ok(Truncation { net: psi, route: TruncationRoute::SlopeCorrection, delta: dl, alpha: Some(alpha), constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu_net::{from_piecewise_linear, identity_net, Breakpoints};

    fn check(t: &Truncation, phi: &SparseNetwork, m: f64) {
        let psi = &t.net;
        for tt in [1e-9, 1.0, 10.0] {
            assert_eq!(psi.eval1(m + tt), 0.0);
            assert_eq!(psi.eval1(-m - tt), 0.0);
        }
        let sup_phi = (0..=4000).map(|i| phi.eval1(-m + 2.0 * m * i as f64 / 4000.0).abs()).fold(0.0, f64::max);
        for i in 0..=4000 {
            let x = -m + 2.0 * m * i as f64 / 4000.0;
            let v = psi.eval1(x);
            assert!(v.abs() <= sup_phi * (1.0 + 1e-12) + 1e-12, "sup bound at {x}");
            if x.abs() <= m - t.delta {
                assert!((v - phi.eval1(x)).abs() <= 1e-12 * (1.0 + sup_phi), "interior mismatch at {x}");
            }
        }
    }

    #[test]
    fn identity_both_routes() {
        let id = identity_net(1);
        for route in [TruncationRoute::SlopeCorrection, TruncationRoute::InputClamp] {
            let t = truncate_outside_interval(&id, 2.0, Some(0.5), route).unwrap();
            assert_eq!(t.net.eval1(3.0), 0.0);
            assert_eq!(t.net.eval1(-3.0), 0.0);
            assert_eq!(t.net.eval1(0.0), 0.0);
            assert!((t.net.eval1(1.5) - 1.5).abs() < 1e-15);
            check(&t, &id, 2.0);
        }
    }

    #[test]
    fn pwl_slope_route() {
        let bp = Breakpoints::new(vec![-3.0, -1.0, 0.5, 1.0, 4.0], vec![2.0, -1.0, 3.0, 0.0, 5.0], -1.0, 2.0).unwrap();
        let phi = from_piecewise_linear(&bp).unwrap();
        for route in [TruncationRoute::SlopeCorrection, TruncationRoute::InputClamp, TruncationRoute::Auto] {
            let t = truncate_outside_interval(&phi, 2.5, None, route).unwrap();
            check(&t, &phi, 2.5);
            assert!(t.constant.is_finite());
        }
    }

    #[test]
    fn rejects_bad_delta() {
        let id = identity_net(1);
        assert!(truncate_outside_interval(&id, 2.0, Some(2.0), TruncationRoute::Auto).is_err());
    }
}
