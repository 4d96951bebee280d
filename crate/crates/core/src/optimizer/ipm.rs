//! Primal-dual interior-point method for
//!
//! ```text
//! minimize  sum_i phi_i(z_i)   subject to  A z = b,  z >= 0
//! ```
//!
//! with separable convex `phi_i(z) = lin*z + quad*z^2/2 - neglog*ln z`.
//! Variables come in blocks; each block owns a few dense local rows and its
//! variables may also appear in a shared set of sparse global rows. The normal
//! equations are reduced onto the global rows with a block Schur complement.

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Cost {
    pub lin: f64,
    pub quad: f64,
    pub neglog: f64,
}

impl Cost {
    pub fn linear(lin: f64) -> Self {
        Cost { lin, ..Default::default() }
    }

    fn grad(&self, z: f64) -> f64 {
        self.lin + self.quad * z - self.neglog / z
    }

    fn hess(&self, z: f64) -> f64 {
        self.quad + self.neglog / (z * z)
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Block {
    pub cost: Vec<Cost>,
    /// Row-major `n_local x n` dense local rows.
    pub local: Vec<f64>,
    pub local_rhs: Vec<f64>,
    /// Entries of each variable's column in the global rows.
    pub global: Vec<Vec<(usize, f64)>>,
    /// Starting point (must be positive).
    pub start: Vec<f64>,
}

impl Block {
    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn n_local(&self) -> usize {
        self.local_rhs.len()
    }

    /// Adds a variable and returns its index within the block.
    pub fn push_var(&mut self, cost: Cost, start: f64) -> usize {
        let n_local = self.n_local();
        let n = self.n();
        if n_local > 0 {
            let mut local = Vec::with_capacity(n_local * (n + 1));
            for r in 0..n_local {
                local.extend_from_slice(&self.local[r * n..(r + 1) * n]);
                local.push(0.0);
            }
            self.local = local;
        }
        self.cost.push(cost);
        self.global.push(Vec::new());
        self.start.push(start);
        n
    }

    /// Adds a local row with the given dense coefficients.
    pub fn push_row(&mut self, coefs: &[f64], rhs: f64) -> usize {
        debug_assert_eq!(coefs.len(), self.n());
        self.local.extend_from_slice(coefs);
        self.local_rhs.push(rhs);
        self.local_rhs.len() - 1
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Program {
    pub blocks: Vec<Block>,
    pub global_rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iters: usize,
    /// Relative primal feasibility target.
    pub primal_tol: f64,
    /// Absolute dual feasibility target.
    pub dual_tol: f64,
    /// Total complementarity target.
    pub gap_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Converged,
    IterationLimit,
    Breakdown,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutcome {
    pub z: Vec<Vec<f64>>,
    pub status: IpmStatus,
    pub iterations: usize,
    pub gap: f64,
    pub primal_res: f64,
    pub dual_res: f64,
}

/// Sparse column entries remapped to the block's touched global rows.
struct BlockIndex {
    touched: Vec<usize>,
    cols: Vec<Vec<(usize, f64)>>,
}

fn index_block(b: &Block) -> BlockIndex {
    let mut touched: Vec<usize> = b.global.iter().flatten().map(|e| e.0).collect();
    touched.sort_unstable();
    touched.dedup();
    let cols = b
        .global
        .iter()
        .map(|col| {
            col.iter()
                .map(|&(r, v)| (touched.binary_search(&r).expect("row is touched"), v))
                .collect()
        })
        .collect();
    BlockIndex { touched, cols }
}

/// In-place lower Cholesky of a dense symmetric matrix. Pivots that cancel to a
/// tiny fraction of their diagonal entry are replaced by a huge value so that the
/// corresponding component of the solution vanishes.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let floor = 1e-14 * a[j * n + j].abs().max(1e-300);
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !d.is_finite() {
            return false;
        }
        let d = if d <= floor { 1e64 } else { d.sqrt() };
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    true
}

fn forward(c: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= c[i * n + k] * x[k];
        }
        x[i] = v / c[i * n + i];
    }
}

fn backward(c: &[f64], n: usize, x: &mut [f64]) {
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in i + 1..n {
            v -= c[k * n + i] * x[k];
        }
        x[i] = v / c[i * n + i];
    }
}

struct BlockFactor {
    /// Cholesky factor of the local normal matrix (`l x l`).
    c: Vec<f64>,
    /// `C^{-1} U^T`, `l x t` row-major.
    y: Vec<f64>,
}

struct Factor {
    blocks: Vec<BlockFactor>,
    schur: Vec<f64>,
    m: usize,
}

struct Solver<'a> {
    prog: &'a Program,
    index: Vec<BlockIndex>,
    m: usize,
}

impl<'a> Solver<'a> {
    fn new(prog: &'a Program) -> Self {
        Solver { prog, index: prog.blocks.iter().map(index_block).collect(), m: prog.global_rhs.len() }
    }

    /// `A z` split into local and global parts.
    fn apply(&self, z: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut glob = vec![0.0; self.m];
        let loc = self
            .prog
            .blocks
            .iter()
            .zip(z)
            .map(|(b, zb)| {
                let n = b.n();
                for (col, &v) in b.global.iter().zip(zb) {
                    for &(r, a) in col {
                        glob[r] += a * v;
                    }
                }
                (0..b.n_local())
                    .map(|r| b.local[r * n..(r + 1) * n].iter().zip(zb).map(|(a, v)| a * v).sum())
                    .collect()
            })
            .collect();
        (loc, glob)
    }

    /// `A^T lambda` per variable.
    fn apply_t(&self, lam_l: &[Vec<f64>], lam_g: &[f64]) -> Vec<Vec<f64>> {
        self.prog
            .blocks
            .iter()
            .zip(lam_l)
            .map(|(b, ll)| {
                let n = b.n();
                (0..n)
                    .map(|i| {
                        let mut v: f64 = b.global[i].iter().map(|&(r, a)| a * lam_g[r]).sum();
                        for (r, l) in ll.iter().enumerate() {
                            v += b.local[r * n + i] * l;
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    fn factor(&self, winv: &[Vec<f64>]) -> Option<Factor> {
        let m = self.m;
        let mut schur = vec![0.0; m * m];
        let mut blocks = Vec::with_capacity(self.prog.blocks.len());
        for ((b, idx), wb) in self.prog.blocks.iter().zip(&self.index).zip(winv) {
            let n = b.n();
            let l = b.n_local();
            let t = idx.touched.len();
            for (col, &w) in idx.cols.iter().zip(wb) {
                for &(r1, a1) in col {
                    let g1 = idx.touched[r1];
                    for &(r2, a2) in col {
                        schur[g1 * m + idx.touched[r2]] += w * a1 * a2;
                    }
                }
            }
            if l == 0 {
                blocks.push(BlockFactor { c: Vec::new(), y: Vec::new() });
                continue;
            }
            let mut c = vec![0.0; l * l];
            for r1 in 0..l {
                for r2 in 0..=r1 {
                    let mut v = 0.0;
                    for i in 0..n {
                        v += b.local[r1 * n + i] * wb[i] * b.local[r2 * n + i];
                    }
                    c[r1 * l + r2] = v;
                    c[r2 * l + r1] = v;
                }
            }
            if !cholesky(&mut c, l) {
                return None;
            }
            // y = C^{-1} U^T where U[t][r] = sum_i w_i g_i[t] a_i[r]
            let mut y = vec![0.0; l * t];
            for (i, col) in idx.cols.iter().enumerate() {
                for &(ti, a) in col {
                    for r in 0..l {
                        y[r * t + ti] += wb[i] * a * b.local[r * n + i];
                    }
                }
            }
            let mut colv = vec![0.0; l];
            for ti in 0..t {
                for r in 0..l {
                    colv[r] = y[r * t + ti];
                }
                forward(&c, l, &mut colv);
                for r in 0..l {
                    y[r * t + ti] = colv[r];
                }
            }
            for t1 in 0..t {
                let g1 = idx.touched[t1];
                for t2 in 0..t {
                    let mut v = 0.0;
                    for r in 0..l {
                        v += y[r * t + t1] * y[r * t + t2];
                    }
                    schur[g1 * m + idx.touched[t2]] -= v;
                }
            }
            blocks.push(BlockFactor { c, y });
        }
        if !cholesky(&mut schur, m) {
            return None;
        }
        Some(Factor { blocks, schur, m })
    }

    fn solve(&self, f: &Factor, h_l: &[Vec<f64>], h_g: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let m = f.m;
        let mut rhs = h_g.to_vec();
        let mut ch: Vec<Vec<f64>> = Vec::with_capacity(h_l.len());
        for ((b, idx), (bf, hl)) in self.prog.blocks.iter().zip(&self.index).zip(f.blocks.iter().zip(h_l)) {
            let l = b.n_local();
            let t = idx.touched.len();
            let mut v = hl.clone();
            if l > 0 {
                forward(&bf.c, l, &mut v);
                for ti in 0..t {
                    let mut s = 0.0;
                    for r in 0..l {
                        s += bf.y[r * t + ti] * v[r];
                    }
                    rhs[idx.touched[ti]] -= s;
                }
            }
            ch.push(v);
        }
        forward(&f.schur, m, &mut rhs);
        backward(&f.schur, m, &mut rhs);
        let lam_g = rhs;
        let lam_l = self
            .prog
            .blocks
            .iter()
            .zip(&self.index)
            .zip(f.blocks.iter().zip(ch))
            .map(|((b, idx), (bf, mut v))| {
                let l = b.n_local();
                let t = idx.touched.len();
                if l > 0 {
                    for r in 0..l {
                        let mut s = 0.0;
                        for ti in 0..t {
                            s += bf.y[r * t + ti] * lam_g[idx.touched[ti]];
                        }
                        v[r] -= s;
                    }
                    backward(&bf.c, l, &mut v);
                }
                v
            })
            .collect();
        (lam_l, lam_g)
    }
}

fn max_step(x: &[Vec<f64>], dx: &[Vec<f64>]) -> f64 {
    let mut a: f64 = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        for (&v, &d) in xb.iter().zip(db) {
            if d < 0.0 {
                a = a.min(-v / d);
            }
        }
    }
    a
}

fn inf_norm<'b>(it: impl IntoIterator<Item = &'b f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Runs Mehrotra's predictor-corrector method with a common primal-dual step.
pub(crate) fn solve(prog: &Program, settings: &IpmSettings) -> IpmOutcome {
    let solver = Solver::new(prog);
    let blocks = &prog.blocks;
    let n_total: usize = blocks.iter().map(Block::n).sum::<usize>().max(1);
    let mut z: Vec<Vec<f64>> = blocks.iter().map(|b| b.start.clone()).collect();
    let mut s: Vec<Vec<f64>> = blocks
        .iter()
        .zip(&z)
        .map(|(b, zb)| b.cost.iter().zip(zb).map(|(c, &v)| c.grad(v).abs().max(1.0)).collect())
        .collect();
    let mut lam_l: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.n_local()]).collect();
    let mut lam_g = vec![0.0; solver.m];
    let b_norm = inf_norm(prog.global_rhs.iter().chain(blocks.iter().flat_map(|b| &b.local_rhs)));

    let mut outcome = IpmOutcome {
        z: z.clone(),
        status: IpmStatus::IterationLimit,
        iterations: 0,
        gap: f64::INFINITY,
        primal_res: f64::INFINITY,
        dual_res: f64::INFINITY,
    };
    let mut tiny_steps = 0;
    let mut best: Option<IpmOutcome> = None;
    let give_up = |mut last: IpmOutcome, best: Option<IpmOutcome>, status: IpmStatus| {
        if let Some(b) = best {
            last = IpmOutcome { iterations: last.iterations, ..b };
        }
        last.status = status;
        last
    };
    for iter in 0..settings.max_iters {
        let grad: Vec<Vec<f64>> = blocks
            .iter()
            .zip(&z)
            .map(|(b, zb)| b.cost.iter().zip(zb).map(|(c, &v)| c.grad(v)).collect())
            .collect();
        let at_lam = solver.apply_t(&lam_l, &lam_g);
        let r_d: Vec<Vec<f64>> = grad
            .iter()
            .zip(&at_lam)
            .zip(&s)
            .map(|((g, a), sb)| g.iter().zip(a).zip(sb).map(|((g, a), s)| g - a - s).collect())
            .collect();
        let (az_l, az_g) = solver.apply(&z);
        let r_pl: Vec<Vec<f64>> = az_l
            .iter()
            .zip(blocks)
            .map(|(a, b)| a.iter().zip(&b.local_rhs).map(|(a, r)| a - r).collect())
            .collect();
        let r_pg: Vec<f64> = az_g.iter().zip(&prog.global_rhs).map(|(a, r)| a - r).collect();
        let gap: f64 = z.iter().flatten().zip(s.iter().flatten()).map(|(a, b)| a * b).sum();
        let mu = gap / n_total as f64;
        let primal_res = inf_norm(r_pl.iter().flatten().chain(&r_pg)) / (1.0 + b_norm);
        let dual_res = inf_norm(r_d.iter().flatten());

        outcome.z.clone_from(&z);
        outcome.iterations = iter;
        outcome.gap = gap;
        outcome.primal_res = primal_res;
        outcome.dual_res = dual_res;
        if !(gap.is_finite() && primal_res.is_finite() && dual_res.is_finite()) {
            return give_up(outcome, best, IpmStatus::Breakdown);
        }
        if primal_res <= settings.primal_tol && dual_res <= settings.dual_tol {
            if gap <= settings.gap_tol {
                outcome.status = IpmStatus::Converged;
                return outcome;
            }
            if best.as_ref().is_none_or(|b| gap < b.gap) {
                best = Some(outcome.clone());
            }
        }

        let hess: Vec<Vec<f64>> = blocks
            .iter()
            .zip(&z)
            .map(|(b, zb)| b.cost.iter().zip(zb).map(|(c, &v)| c.hess(v)).collect())
            .collect();
        let winv: Vec<Vec<f64>> = hess
            .iter()
            .zip(&z)
            .zip(&s)
            .map(|((h, zb), sb)| h.iter().zip(zb).zip(sb).map(|((h, z), s)| 1.0 / (h + s / z)).collect())
            .collect();
        let Some(factor) = solver.factor(&winv) else {
            return give_up(outcome, best, IpmStatus::Breakdown);
        };

        let direction = |r_c: &[Vec<f64>]| {
            // g = -r_d + r_c / z
            let g: Vec<Vec<f64>> = r_d
                .iter()
                .zip(r_c)
                .zip(&z)
                .map(|((rd, rc), zb)| rd.iter().zip(rc).zip(zb).map(|((rd, rc), z)| -rd + rc / z).collect())
                .collect();
            let wg: Vec<Vec<f64>> = g
                .iter()
                .zip(&winv)
                .map(|(g, w)| g.iter().zip(w).map(|(g, w)| g * w).collect())
                .collect();
            let (awg_l, awg_g) = solver.apply(&wg);
            let h_l: Vec<Vec<f64>> = r_pl
                .iter()
                .zip(&awg_l)
                .map(|(r, a)| r.iter().zip(a).map(|(r, a)| -r - a).collect())
                .collect();
            let h_g: Vec<f64> = r_pg.iter().zip(&awg_g).map(|(r, a)| -r - a).collect();
            let (dl, dg) = solver.solve(&factor, &h_l, &h_g);
            let at_d = solver.apply_t(&dl, &dg);
            let dz: Vec<Vec<f64>> = at_d
                .iter()
                .zip(&g)
                .zip(&winv)
                .map(|((a, g), w)| a.iter().zip(g).zip(w).map(|((a, g), w)| w * (a + g)).collect())
                .collect();
            let ds: Vec<Vec<f64>> = r_c
                .iter()
                .zip(&s)
                .zip(dz.iter().zip(&z))
                .map(|((rc, sb), (dzb, zb))| {
                    rc.iter()
                        .zip(sb)
                        .zip(dzb.iter().zip(zb))
                        .map(|((rc, s), (dz, z))| (rc - s * dz) / z)
                        .collect()
                })
                .collect();
            (dz, ds, dl, dg)
        };

        let r_aff: Vec<Vec<f64>> = z
            .iter()
            .zip(&s)
            .map(|(zb, sb)| zb.iter().zip(sb).map(|(z, s)| -z * s).collect())
            .collect();
        let (dz_a, ds_a, _, _) = direction(&r_aff);
        let ap = max_step(&z, &dz_a).min(1.0);
        let ad = max_step(&s, &ds_a).min(1.0);
        let mut gap_aff = 0.0;
        for b in 0..z.len() {
            for i in 0..z[b].len() {
                gap_aff += (z[b][i] + ap * dz_a[b][i]) * (s[b][i] + ad * ds_a[b][i]);
            }
        }
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        let r_c: Vec<Vec<f64>> = (0..z.len())
            .map(|b| {
                (0..z[b].len())
                    .map(|i| sigma * mu - z[b][i] * s[b][i] - dz_a[b][i] * ds_a[b][i])
                    .collect()
            })
            .collect();
        let (dz, ds, dl, dg) = direction(&r_c);
        let eta = (1.0 - mu).clamp(0.9, 0.995);
        let alpha = (eta * max_step(&z, &dz)).min(eta * max_step(&s, &ds)).min(1.0);
        if !alpha.is_finite() {
            return give_up(outcome, best, IpmStatus::Breakdown);
        }
        tiny_steps = if alpha < 1e-10 { tiny_steps + 1 } else { 0 };
        if tiny_steps >= 10 {
            return give_up(outcome, best, IpmStatus::Breakdown);
        }
        for b in 0..z.len() {
            for i in 0..z[b].len() {
                z[b][i] += alpha * dz[b][i];
                s[b][i] += alpha * ds[b][i];
            }
            for (l, d) in lam_l[b].iter_mut().zip(&dl[b]) {
                *l += alpha * d;
            }
        }
        for (l, d) in lam_g.iter_mut().zip(&dg) {
            *l += alpha * d;
        }
    }
    outcome.z = z;
    outcome.iterations = settings.max_iters;
    give_up(outcome, best, IpmStatus::IterationLimit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> IpmSettings {
        IpmSettings { max_iters: 200, primal_tol: 1e-11, dual_tol: 1e-10, gap_tol: 1e-10 }
    }

    #[test]
    fn cholesky_solves_spd() {
        let mut a = vec![4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0];
        let orig = a.clone();
        assert!(cholesky(&mut a, 3));
        let mut x = vec![1.0, 2.0, 3.0];
        forward(&a, 3, &mut x);
        backward(&a, 3, &mut x);
        for i in 0..3 {
            let v: f64 = (0..3).map(|j| orig[i * 3 + j] * x[j]).sum();
            assert!((v - (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn small_lp() {
        // min -x1 - 2 x2  s.t. x1 + x2 + x3 = 1 (local), x2 + x4 = 0.4 (global)
        let mut b = Block::default();
        for c in [-1.0, -2.0, 0.0] {
            b.push_var(Cost::linear(c), 0.3);
        }
        b.push_row(&[1.0, 1.0, 1.0], 1.0);
        b.global[1].push((0, 1.0));
        let mut g = Block::default();
        g.push_var(Cost::linear(0.0), 1.0);
        g.global[0].push((0, 1.0));
        let prog = Program { blocks: vec![b, g], global_rhs: vec![0.4] };
        let out = solve(&prog, &settings());
        assert_eq!(out.status, IpmStatus::Converged);
        let z = &out.z[0];
        assert!((z[0] - 0.6).abs() < 1e-8 && (z[1] - 0.4).abs() < 1e-8 && z[2].abs() < 1e-8);
    }

    #[test]
    fn entropy_like_problem() {
        // min -0.3 ln q1 - 0.7 ln q2, q1 + q2 = 1 -> q = (0.3, 0.7)
        let mut b = Block::default();
        b.push_var(Cost { neglog: 0.3, ..Default::default() }, 0.5);
        b.push_var(Cost { neglog: 0.7, ..Default::default() }, 0.5);
        b.push_row(&[1.0, 1.0], 1.0);
        let prog = Program { blocks: vec![b], global_rhs: vec![] };
        let out = solve(&prog, &settings());
        assert_eq!(out.status, IpmStatus::Converged);
        assert!((out.z[0][0] - 0.3).abs() < 1e-8);
    }
}
