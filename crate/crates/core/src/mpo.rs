//! Reduced Gibbs states of open nearest-neighbour chains that are too long
//! for dense diagonalization.
//!
//! `e^{−βU}` is built as a matrix product operator by imaginary-time
//! evolution from the identity, with a fourth-order Suzuki splitting of the
//! chain into even and odd bonds. Bond dimensions are truncated by relative
//! singular value, with the orthogonality center kept at the active bond so
//! truncation is optimal in Frobenius norm. The kept sites are then read out
//! as a dense density matrix with every other site traced.

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Potential;
use crate::operator::LocalOperator;
use crate::region::Region;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpoOptions {
    /// Largest imaginary-time step; the actual step divides `β` evenly.
    pub time_step: f64,
    /// Singular values below `svd_cutoff · s_max` are discarded.
    pub svd_cutoff: f64,
    pub max_bond: usize,
}

impl Default for MpoOptions {
    fn default() -> Self {
        MpoOptions { time_step: 0.025, svd_cutoff: 1e-14, max_bond: 512 }
    }
}

/// Diagnostics of one evolution.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MpoStats {
    pub steps: usize,
    pub max_bond: usize,
    /// Sum of squared discarded singular values, relative to the kept weight.
    pub discarded_weight: f64,
}

/// One site tensor with index order `(left, out, in, right)`.
#[derive(Clone)]
struct Tensor {
    dl: usize,
    dr: usize,
    n: usize,
    data: Vec<f64>,
}

impl Tensor {
    fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for s in 0..n {
            data[s * n + s] = 1.0;
        }
        Tensor { dl: 1, dr: 1, n, data }
    }

    #[inline]
    fn idx(&self, a: usize, o: usize, i: usize, b: usize) -> usize {
        ((a * self.n + o) * self.n + i) * self.dr + b
    }

    /// Rows `(a, o, i)`, columns `b`.
    fn as_left_matrix(&self) -> Mat<f64> {
        let rows = self.dl * self.n * self.n;
        Mat::from_fn(rows, self.dr, |r, b| self.data[r * self.dr + b])
    }

    /// Rows `a`, columns `(o, i, b)`.
    fn as_right_matrix(&self) -> Mat<f64> {
        let cols = self.n * self.n * self.dr;
        Mat::from_fn(self.dl, cols, |a, c| self.data[a * cols + c])
    }

    fn from_left_matrix(m: &Mat<f64>, dl: usize, n: usize) -> Self {
        let dr = m.ncols();
        let mut data = Vec::with_capacity(m.nrows() * dr);
        for r in 0..m.nrows() {
            for b in 0..dr {
                data.push(m[(r, b)]);
            }
        }
        Tensor { dl, dr, n, data }
    }

    fn from_right_matrix(m: &Mat<f64>, dr: usize, n: usize) -> Self {
        let dl = m.nrows();
        let cols = m.ncols();
        let mut data = Vec::with_capacity(dl * cols);
        for a in 0..dl {
            for c in 0..cols {
                data.push(m[(a, c)]);
            }
        }
        Tensor { dl, dr, n, data }
    }
}

struct Chain {
    n: usize,
    tensors: Vec<Tensor>,
    center: usize,
    opts: MpoOptions,
    stats: MpoStats,
}

impl Chain {
    fn identity(len: usize, n: usize, opts: MpoOptions) -> Self {
        Chain {
            n,
            tensors: vec![Tensor::identity(n); len],
            center: 0,
            opts,
            stats: MpoStats::default(),
        }
    }

    fn len(&self) -> usize {
        self.tensors.len()
    }

    fn move_right(&mut self) -> Result<()> {
        let c = self.center;
        let m = self.tensors[c].as_left_matrix();
        let qr = m.qr();
        let q = qr.compute_thin_Q();
        let r = qr.thin_R().to_owned();
        let dl = self.tensors[c].dl;
        self.tensors[c] = Tensor::from_left_matrix(&q, dl, self.n);
        let next = self.tensors[c + 1].as_right_matrix();
        let dr = self.tensors[c + 1].dr;
        self.tensors[c + 1] = Tensor::from_right_matrix(&(&r * &next), dr, self.n);
        self.center += 1;
        Ok(())
    }

    fn move_left(&mut self) -> Result<()> {
        let c = self.center;
        let m = self.tensors[c].as_right_matrix();
        let adj = m.transpose().to_owned();
        let qr = adj.qr();
        let q = qr.compute_thin_Q();
        let r = qr.thin_R().to_owned();
        let dr = self.tensors[c].dr;
        self.tensors[c] = Tensor::from_right_matrix(&q.transpose().to_owned(), dr, self.n);
        let prev = self.tensors[c - 1].as_left_matrix();
        let dl = self.tensors[c - 1].dl;
        self.tensors[c - 1] = Tensor::from_left_matrix(&(&prev * r.transpose()), dl, self.n);
        self.center -= 1;
        Ok(())
    }

    fn move_center(&mut self, target: usize) -> Result<()> {
        while self.center < target {
            self.move_right()?;
        }
        while self.center > target {
            self.move_left()?;
        }
        Ok(())
    }

    /// Applies `gate` (an `n² × n²` matrix on the out indices of sites `k`,
    /// `k+1`) and splits back by truncated SVD. The orthogonality center must
    /// sit on `k` or `k+1`; it ends on `k+1` when `absorb_right`, else on `k`.
    fn apply_gate(&mut self, k: usize, gate: &Mat<f64>, absorb_right: bool) -> Result<()> {
        let n = self.n;
        let (left, right) = (&self.tensors[k], &self.tensors[k + 1]);
        let (dl, dm, dr) = (left.dl, left.dr, right.dr);
        // T[(a,o1,i1),(o2,i2,b)] = Σ_c W_k[a,o1,i1,c] W_{k+1}[c,o2,i2,b]
        let t = &left.as_left_matrix() * &right.as_right_matrix();
        debug_assert_eq!(t.ncols(), n * n * dr);
        let _ = dm;
        let rows = dl * n * n;
        let cols = n * n * dr;
        let mut theta = Mat::<f64>::zeros(rows, cols);
        for a in 0..dl {
            for i1 in 0..n {
                for i2 in 0..n {
                    for b in 0..dr {
                        for o1 in 0..n {
                            for o2 in 0..n {
                                let g_row = o1 * n + o2;
                                let mut acc = 0.0;
                                for p1 in 0..n {
                                    for p2 in 0..n {
                                        let g = gate[(g_row, p1 * n + p2)];
                                        if g != 0.0 {
                                            acc += g * t[((a * n + p1) * n + i1, (p2 * n + i2) * dr + b)];
                                        }
                                    }
                                }
                                theta[((a * n + o1) * n + i1, (o2 * n + i2) * dr + b)] = acc;
                            }
                        }
                    }
                }
            }
        }
        let svd = theta.thin_svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let s: Vec<f64> = (0..svd.S().dim()).map(|j| svd.S()[j]).collect();
        let smax = s.first().copied().unwrap_or(0.0);
        let mut keep = s
            .iter()
            .take_while(|&&x| x > self.opts.svd_cutoff * smax)
            .count()
            .max(1);
        keep = keep.min(self.opts.max_bond);
        let kept_norm2: f64 = s[..keep].iter().map(|x| x * x).sum();
        let dropped_norm2: f64 = s[keep..].iter().map(|x| x * x).sum();
        if kept_norm2 > 0.0 {
            self.stats.discarded_weight += dropped_norm2 / kept_norm2;
        }
        self.stats.max_bond = self.stats.max_bond.max(keep);
        let scale = 1.0 / kept_norm2.sqrt().max(f64::MIN_POSITIVE);
        let u = svd.U();
        let v = svd.V();
        let (lm, rm) = if absorb_right {
            let lm = Mat::from_fn(rows, keep, |r, j| u[(r, j)]);
            let rm = Mat::from_fn(keep, cols, |j, c| v[(c, j)] * (s[j] * scale));
            (lm, rm)
        } else {
            let lm = Mat::from_fn(rows, keep, |r, j| u[(r, j)] * (s[j] * scale));
            let rm = Mat::from_fn(keep, cols, |j, c| v[(c, j)]);
            (lm, rm)
        };
        self.tensors[k] = Tensor::from_left_matrix(&lm, dl, n);
        self.tensors[k + 1] = Tensor::from_right_matrix(&rm, dr, n);
        self.center = if absorb_right { k + 1 } else { k };
        Ok(())
    }

    fn apply_layer(&mut self, gates: &[(usize, Mat<f64>)]) -> Result<()> {
        if gates.is_empty() {
            return Ok(());
        }
        if self.center <= self.len() / 2 {
            for (k, g) in gates {
                self.move_center(*k)?;
                self.apply_gate(*k, g, true)?;
            }
        } else {
            for (k, g) in gates.iter().rev() {
                self.move_center(*k + 1)?;
                self.apply_gate(*k, g, false)?;
            }
        }
        Ok(())
    }

    /// Dense matrix of the operator with every site outside `keep` traced.
    /// `keep` holds chain positions in increasing order.
    fn reduced(&self, keep: &[usize]) -> Mat<f64> {
        let n = self.n;
        let len = self.len();
        if keep.is_empty() {
            let mut v = vec![1.0];
            for t in &self.tensors {
                v = trace_site_right(&v, t);
            }
            return Mat::from_fn(1, 1, |_, _| v[0]);
        }
        // Split between the left and right halves of the kept sites.
        let split_pos = keep[(keep.len() - 1) / 2];
        let is_kept = |k: usize| keep.binary_search(&k).is_ok();

        // Left block: dims (p, q, bond) with p, q over kept digits so far.
        let mut lp = 1usize;
        let mut left = vec![1.0];
        let mut ld = 1usize;
        for k in 0..=split_pos {
            let t = &self.tensors[k];
            if is_kept(k) {
                let np = lp * n;
                let mut next = vec![0.0; np * np * t.dr];
                for p in 0..lp {
                    for q in 0..lp {
                        for a in 0..ld {
                            let x = left[(p * lp + q) * ld + a];
                            if x == 0.0 {
                                continue;
                            }
                            for s in 0..n {
                                for u in 0..n {
                                    let row = p * n + s;
                                    let col = q * n + u;
                                    let base = (row * np + col) * t.dr;
                                    let w0 = t.idx(a, s, u, 0);
                                    for b in 0..t.dr {
                                        next[base + b] += x * t.data[w0 + b];
                                    }
                                }
                            }
                        }
                    }
                }
                left = next;
                lp = np;
            } else {
                let mut next = vec![0.0; lp * lp * t.dr];
                for pq in 0..lp * lp {
                    for a in 0..ld {
                        let x = left[pq * ld + a];
                        if x == 0.0 {
                            continue;
                        }
                        for s in 0..n {
                            let w0 = t.idx(a, s, s, 0);
                            for b in 0..t.dr {
                                next[pq * t.dr + b] += x * t.data[w0 + b];
                            }
                        }
                    }
                }
                left = next;
            }
            ld = t.dr;
        }

        // Right block: dims (p, q, bond) with the bond on the left.
        let mut rp = 1usize;
        let mut right = vec![1.0];
        let mut rd = 1usize;
        for k in (split_pos + 1..len).rev() {
            let t = &self.tensors[k];
            if is_kept(k) {
                let np = rp * n;
                let mut next = vec![0.0; np * np * t.dl];
                for a in 0..t.dl {
                    for s in 0..n {
                        for u in 0..n {
                            let w0 = t.idx(a, s, u, 0);
                            for p in 0..rp {
                                for q in 0..rp {
                                    let mut acc = 0.0;
                                    let base = (p * rp + q) * rd;
                                    for b in 0..rd {
                                        acc += t.data[w0 + b] * right[base + b];
                                    }
                                    let row = s * rp + p;
                                    let col = u * rp + q;
                                    next[(row * np + col) * t.dl + a] += acc;
                                }
                            }
                        }
                    }
                }
                right = next;
                rp = np;
            } else {
                let mut next = vec![0.0; rp * rp * t.dl];
                for a in 0..t.dl {
                    for s in 0..n {
                        let w0 = t.idx(a, s, s, 0);
                        for pq in 0..rp * rp {
                            let mut acc = 0.0;
                            for b in 0..rd {
                                acc += t.data[w0 + b] * right[pq * rd + b];
                            }
                            next[pq * t.dl + a] += acc;
                        }
                    }
                }
                right = next;
            }
            rd = t.dl;
        }
        debug_assert_eq!(ld, rd);

        // ρ[(p,p'),(q,q')] = Σ_b L[p,q,b] R[p',q',b]
        let lm = Mat::from_fn(lp * lp, ld, |pq, b| left[pq * ld + b]);
        let rm = Mat::from_fn(ld, rp * rp, |b, pq| right[pq * rd + b]);
        let joined = &lm * &rm;
        let d = lp * rp;
        Mat::from_fn(d, d, |row, col| {
            let (p, p2) = (row / rp, row % rp);
            let (q, q2) = (col / rp, col % rp);
            joined[(p * lp + q, p2 * rp + q2)]
        })
    }
}

fn trace_site_right(v: &[f64], t: &Tensor) -> Vec<f64> {
    let mut out = vec![0.0; t.dr];
    for a in 0..t.dl {
        if v[a] == 0.0 {
            continue;
        }
        for s in 0..t.n {
            let w0 = t.idx(a, s, s, 0);
            for b in 0..t.dr {
                out[b] += v[a] * t.data[w0 + b];
            }
        }
    }
    out
}

/// Splits the chain energy into one `n² × n²` real symmetric matrix per bond.
/// One-site terms are shared equally between the two bonds touching the
/// site (all of it at the chain ends).
fn bond_hamiltonians(pot: &Potential, chain: &Region) -> Result<Vec<Mat<f64>>> {
    let n = pot.site_dim();
    let len = chain.volume();
    let sites = chain.sites();
    let mut bonds = vec![Mat::<f64>::zeros(n * n, n * n); len - 1];
    for t in pot.translates_within(chain) {
        let sup = t.support().sites();
        let m = real_part(&t)?;
        let first = chain.position(&sup[0]).expect("translate inside chain");
        match sup.len() {
            1 => {
                let shares: Vec<(usize, bool, f64)> = if len == 1 {
                    Vec::new()
                } else if first == 0 {
                    vec![(0, true, 1.0)]
                } else if first == len - 1 {
                    vec![(len - 2, false, 1.0)]
                } else {
                    vec![(first - 1, false, 0.5), (first, true, 0.5)]
                };
                for (b, on_left, w) in shares {
                        for x in 0..n {
                        for y in 0..n {
                            for e in 0..n {
                                let (r, c) = if on_left { (x * n + e, y * n + e) } else { (e * n + x, e * n + y) };
                                bonds[b][(r, c)] += m[(x, y)] * w;
                            }
                        }
                    }
                }
            }
            2 => {
                if sup[1] != sites[first + 1] {
                    return Err(Error::validation("interaction is not nearest-neighbour on the chain"));
                }
                for r in 0..n * n {
                    for c in 0..n * n {
                        bonds[first][(r, c)] += m[(r, c)];
                    }
                }
            }
            _ => return Err(Error::validation("MPO evolution supports one- and two-site interactions only")),
        }
    }
    Ok(bonds)
}

fn real_part(op: &LocalOperator) -> Result<Mat<f64>> {
    let m = op.matrix();
    if (0..m.ncols()).any(|j| (0..m.nrows()).any(|i| m[(i, j)].im != 0.0)) {
        return Err(Error::validation("MPO route needs a real Hamiltonian"));
    }
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re))
}

fn exp_symmetric(h: &Mat<f64>, tau: f64) -> Result<Mat<f64>> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let u = evd.U();
    let d = h.nrows();
    let uw = Mat::from_fn(d, d, |i, k| u[(i, k)] * (-tau * evd.S()[k]).exp());
    Ok(&uw * u.transpose())
}

/// Fourth-order Suzuki sequence of `(layer, τ)` pairs for one step, with
/// adjacent equal layers merged.
fn suzuki4(dt: f64) -> Vec<(usize, f64)> {
    let p = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
    let mut seq: Vec<(usize, f64)> = Vec::new();
    for c in [p, p, 1.0 - 4.0 * p, p, p] {
        for (layer, tau) in [(0, c * dt / 2.0), (1, c * dt), (0, c * dt / 2.0)] {
            match seq.last_mut() {
                Some((l, t)) if *l == layer => *t += tau,
                _ => seq.push((layer, tau)),
            }
        }
    }
    seq
}

/// `e^{−βU_chain}` as a matrix product operator, for a 1D interval `chain`
/// and a real nearest-neighbour potential.
pub struct GibbsMpo {
    chain: Region,
    mpo: Chain,
}

impl GibbsMpo {
    pub fn evolve(pot: &Potential, beta: f64, chain: &Region, opts: &MpoOptions) -> Result<Self> {
        if !pot.is_nearest_neighbor_chain() {
            return Err(Error::validation("MPO route needs a 1D nearest-neighbour potential"));
        }
        if !chain.is_interval() || chain.volume() < 2 {
            return Err(Error::geometry(format!("MPO route needs an interval of length >= 2, got {chain}")));
        }
        if !(opts.time_step > 0.0 && opts.svd_cutoff >= 0.0 && opts.max_bond >= 1) {
            return Err(Error::validation("invalid MPO options"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::validation("beta must be finite and >= 0"));
        }
        let n = pot.site_dim();
        let len = chain.volume();
        let bonds = bond_hamiltonians(pot, chain)?;
        let steps = if beta == 0.0 { 0 } else { (beta / opts.time_step).ceil() as usize };
        let dt = if steps == 0 { 0.0 } else { beta / steps as f64 };
        let mut mpo = Chain::identity(len, n, opts.clone());
        mpo.stats.steps = steps;

        let seq = suzuki4(dt);
        let mut gate_cache: Vec<(usize, f64, Vec<(usize, Mat<f64>)>)> = Vec::new();
        for _ in 0..steps {
            for &(layer, tau) in &seq {
                let pos = match gate_cache.iter().position(|(l, t, _)| *l == layer && *t == tau) {
                    Some(p) => p,
                    None => {
                        let gates = (layer..len - 1)
                            .step_by(2)
                            .map(|k| exp_symmetric(&bonds[k], tau).map(|g| (k, g)))
                            .collect::<Result<Vec<_>>>()?;
                        gate_cache.push((layer, tau, gates));
                        gate_cache.len() - 1
                    }
                };
                mpo.apply_layer(&gate_cache[pos].2)?;
            }
        }
        Ok(GibbsMpo { chain: chain.clone(), mpo })
    }

    pub fn stats(&self) -> &MpoStats {
        &self.mpo.stats
    }

    /// Normalized reduced density matrix on `keep`.
    pub fn marginal(&self, keep: &Region) -> Result<LocalOperator> {
        if !keep.is_subset_of(&self.chain) {
            return Err(Error::Containment { inner: keep.to_string(), outer: self.chain.to_string() });
        }
        let positions: Vec<usize> = keep
            .sites()
            .iter()
            .map(|s| self.chain.position(s).expect("kept site"))
            .collect();
        let raw = self.mpo.reduced(&positions);
        let tr: f64 = (0..raw.nrows()).map(|i| raw[(i, i)]).sum();
        if !(tr > 0.0) {
            return Err(Error::Linalg(format!("MPO trace is not positive: {tr:e}")));
        }
        let rho = Mat::from_fn(raw.nrows(), raw.ncols(), |i, j| {
            c64::new(0.5 * (raw[(i, j)] + raw[(j, i)]) / tr, 0.0)
        });
        Ok(LocalOperator::hermitian_unchecked(keep.clone(), self.mpo.n, rho))
    }
}

/// `Tr_{chain∖keep} e^{−βU_chain} / Tr e^{−βU_chain}`.
pub fn chain_gibbs_marginal(
    pot: &Potential,
    beta: f64,
    chain: &Region,
    keep: &Region,
    opts: &MpoOptions,
) -> Result<(LocalOperator, MpoStats)> {
    if !keep.is_subset_of(chain) {
        return Err(Error::Containment { inner: keep.to_string(), outer: chain.to_string() });
    }
    let g = GibbsMpo::evolve(pot, beta, chain, opts)?;
    let rho = g.marginal(keep)?;
    Ok((rho, g.stats().clone()))
}
