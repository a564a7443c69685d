//! Primal-dual interior-point method for convex QPs with block structure.
//!
//! Solves `min Σ_b ½ x_bᵀ P_b x_b + q_bᵀ x_b` subject to local rows
//! `G_b x_b <= h_b` in each block and a few coupling rows spanning blocks.
//! Newton systems are reduced to one Cholesky per block plus a small dense
//! Schur complement for the coupling rows, so the cost grows linearly with
//! the number of blocks. Steps use Mehrotra's predictor-corrector.

use super::linalg::{cholesky_regularized, cholesky_solve};

/// Sparse constraint row over one block's variables.
pub(crate) type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, Default)]
pub(crate) struct Block {
    pub n: usize,
    /// Dense symmetric `n x n`, row-major.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub rows: Vec<Row>,
    pub h: Vec<f64>,
}

impl Block {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            p: vec![0.0; n * n],
            q: vec![0.0; n],
            rows: Vec::new(),
            h: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Row, h: f64) {
        self.rows.push(row);
        self.h.push(h);
    }
}

/// Row over variables of several blocks: `(block, var, coefficient)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct CouplingRow {
    pub terms: Vec<(usize, usize, f64)>,
    pub h: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct StructuredQp {
    pub blocks: Vec<Block>,
    pub coupling: Vec<CouplingRow>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    /// Relative primal and dual residual target.
    pub tol_feas: f64,
    /// Relative duality gap target.
    pub tol_gap: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_feas: 1e-10,
            tol_gap: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Solved,
    MaxIterations,
    Stalled,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub x: Vec<Vec<f64>>,
    pub z_local: Vec<Vec<f64>>,
    pub z_coupling: Vec<f64>,
    pub primal_obj: f64,
    pub iterations: usize,
    pub res_primal: f64,
    pub res_dual: f64,
    pub rel_gap: f64,
}

impl IpmResult {
    pub fn residual(&self) -> f64 {
        self.res_primal.max(self.res_dual).max(self.rel_gap)
    }
}

struct Iterate {
    x: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    sc: Vec<f64>,
    zc: Vec<f64>,
}

struct Direction {
    dx: Vec<Vec<f64>>,
    ds: Vec<Vec<f64>>,
    dz: Vec<Vec<f64>>,
    dsc: Vec<f64>,
    dzc: Vec<f64>,
}

/// Coupling terms regrouped per block: for coupling row `c`, the sparse
/// entries that fall in block `b`.
fn coupling_by_block(qp: &StructuredQp) -> Vec<Vec<Row>> {
    let mut out = vec![vec![Vec::new(); qp.coupling.len()]; qp.blocks.len()];
    for (c, row) in qp.coupling.iter().enumerate() {
        for &(b, k, v) in &row.terms {
            out[b][c].push((k, v));
        }
    }
    out
}

fn row_dot(row: &Row, x: &[f64]) -> f64 {
    row.iter().map(|&(k, v)| v * x[k]).sum()
}

fn inf_norm<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Factor {
    chol: Vec<Vec<f64>>,
    /// `H_b^{-1} C_bᵀ` per block, stored column by coupling row.
    u: Vec<Vec<Vec<f64>>>,
    schur: Vec<f64>,
}

pub(crate) fn solve(qp: &StructuredQp, settings: &IpmSettings) -> IpmResult {
    let nb = qp.blocks.len();
    let mc = qp.coupling.len();
    let cb = coupling_by_block(qp);
    let m_total: usize = qp.blocks.iter().map(|b| b.rows.len()).sum::<usize>() + mc;

    let h_norm = inf_norm(
        qp.blocks
            .iter()
            .flat_map(|b| b.h.iter())
            .chain(qp.coupling.iter().map(|c| &c.h)),
    );
    let q_norm = inf_norm(qp.blocks.iter().flat_map(|b| b.q.iter()));

    let mut it = Iterate {
        x: qp.blocks.iter().map(|b| vec![0.0; b.n]).collect(),
        s: qp
            .blocks
            .iter()
            .map(|b| b.h.iter().map(|&h| h.max(1.0)).collect())
            .collect(),
        z: qp.blocks.iter().map(|b| vec![1.0; b.rows.len()]).collect(),
        sc: qp.coupling.iter().map(|c| c.h.max(1.0)).collect(),
        zc: vec![1.0; mc],
    };

    let mut result = IpmResult {
        status: IpmStatus::MaxIterations,
        x: it.x.clone(),
        z_local: it.z.clone(),
        z_coupling: it.zc.clone(),
        primal_obj: 0.0,
        iterations: 0,
        res_primal: f64::INFINITY,
        res_dual: f64::INFINITY,
        rel_gap: f64::INFINITY,
    };

    if m_total == 0 {
        // unconstrained: only meaningful when the problem is trivially empty
        result.status = if qp.blocks.iter().all(|b| b.n == 0) {
            IpmStatus::Solved
        } else {
            IpmStatus::NumericalFailure
        };
        result.res_primal = 0.0;
        result.res_dual = 0.0;
        result.rel_gap = 0.0;
        return result;
    }

    let mut best_residual = f64::INFINITY;
    let mut small_steps = 0;
    let mut since_best = 0;
    let mut work = Vec::new();

    for iter in 0..settings.max_iter {
        // residuals
        let mut rp: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let mut rd: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let mut pobj = 0.0;
        for (b, blk) in qp.blocks.iter().enumerate() {
            let x = &it.x[b];
            let mut r = vec![0.0; blk.n];
            for i in 0..blk.n {
                let mut v = blk.q[i];
                for j in 0..blk.n {
                    v += blk.p[i * blk.n + j] * x[j];
                }
                pobj += x[i] * (blk.q[i] + 0.5 * (v - blk.q[i]));
                r[i] = v;
            }
            for (row, &zr) in blk.rows.iter().zip(&it.z[b]) {
                for &(k, v) in row {
                    r[k] += v * zr;
                }
            }
            for (c, row) in cb[b].iter().enumerate() {
                for &(k, v) in row {
                    r[k] += v * it.zc[c];
                }
            }
            rd.push(r);
            rp.push(
                blk.rows
                    .iter()
                    .enumerate()
                    .map(|(r, row)| row_dot(row, x) + it.s[b][r] - blk.h[r])
                    .collect(),
            );
        }
        let rpc: Vec<f64> = qp
            .coupling
            .iter()
            .enumerate()
            .map(|(c, row)| {
                row.terms
                    .iter()
                    .map(|&(b, k, v)| v * it.x[b][k])
                    .sum::<f64>()
                    + it.sc[c]
                    - row.h
            })
            .collect();

        let gap: f64 = it
            .s
            .iter()
            .zip(&it.z)
            .flat_map(|(s, z)| s.iter().zip(z).map(|(a, b)| a * b))
            .sum::<f64>()
            + it.sc.iter().zip(&it.zc).map(|(a, b)| a * b).sum::<f64>();
        let mu = gap / m_total as f64;
        let res_p = inf_norm(rp.iter().flatten().chain(rpc.iter())) / (1.0 + h_norm);
        let res_d = inf_norm(rd.iter().flatten()) / (1.0 + q_norm);
        let rel_gap = gap / pobj.abs().max(1.0);

        log::trace!("ipm {iter}: rp {res_p:.2e} rd {res_d:.2e} gap {rel_gap:.2e} mu {mu:.2e}");
        if !(res_p.is_finite() && res_d.is_finite() && rel_gap.is_finite()) {
            result.status = IpmStatus::NumericalFailure;
            return result;
        }
        let residual = res_p.max(res_d).max(rel_gap);
        if residual < best_residual || iter == 0 {
            best_residual = residual;
            since_best = 0;
            result.x.clone_from(&it.x);
            result.z_local.clone_from(&it.z);
            result.z_coupling.clone_from(&it.zc);
            result.primal_obj = pobj;
            result.res_primal = res_p;
            result.res_dual = res_d;
            result.rel_gap = rel_gap;
        } else {
            since_best += 1;
        }
        result.iterations = iter;
        if res_p <= settings.tol_feas && res_d <= settings.tol_feas && rel_gap <= settings.tol_gap {
            result.status = IpmStatus::Solved;
            return result;
        }

        // Rounding floors the residuals on ill-conditioned problems; stop
        // once the iterates no longer improve on the best point.
        if since_best >= 8 {
            result.status = IpmStatus::Stalled;
            return result;
        }

        let Some(factor) = factorize(qp, &cb, &it, &mut work) else {
            result.status = IpmStatus::NumericalFailure;
            return result;
        };

        // predictor
        let rc_aff: Vec<Vec<f64>> = it
            .s
            .iter()
            .zip(&it.z)
            .map(|(s, z)| s.iter().zip(z).map(|(a, b)| a * b).collect())
            .collect();
        let rcc_aff: Vec<f64> = it.sc.iter().zip(&it.zc).map(|(a, b)| a * b).collect();
        let aff = refined_direction(qp, &cb, &it, &factor, &rp, &rpc, &rd, &rc_aff, &rcc_aff);
        let a_aff = max_step(&it, &aff);
        let mut gap_aff = 0.0;
        for b in 0..nb {
            for r in 0..it.s[b].len() {
                gap_aff += (it.s[b][r] + a_aff * aff.ds[b][r]) * (it.z[b][r] + a_aff * aff.dz[b][r]);
            }
        }
        for c in 0..mc {
            gap_aff += (it.sc[c] + a_aff * aff.dsc[c]) * (it.zc[c] + a_aff * aff.dzc[c]);
        }
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Vec<Vec<f64>> = (0..nb)
            .map(|b| {
                (0..it.s[b].len())
                    .map(|r| it.s[b][r] * it.z[b][r] + aff.ds[b][r] * aff.dz[b][r] - sigma * mu)
                    .collect()
            })
            .collect();
        let rcc: Vec<f64> = (0..mc)
            .map(|c| it.sc[c] * it.zc[c] + aff.dsc[c] * aff.dzc[c] - sigma * mu)
            .collect();
        let dir = refined_direction(qp, &cb, &it, &factor, &rp, &rpc, &rd, &rc, &rcc);
        let alpha = (0.99 * max_step(&it, &dir)).min(1.0);

        for b in 0..nb {
            for k in 0..it.x[b].len() {
                it.x[b][k] += alpha * dir.dx[b][k];
            }
            for r in 0..it.s[b].len() {
                it.s[b][r] += alpha * dir.ds[b][r];
                it.z[b][r] += alpha * dir.dz[b][r];
            }
        }
        for c in 0..mc {
            it.sc[c] += alpha * dir.dsc[c];
            it.zc[c] += alpha * dir.dzc[c];
        }

        if alpha < 1e-8 {
            small_steps += 1;
            if small_steps >= 5 {
                result.status = IpmStatus::Stalled;
                return result;
            }
        } else {
            small_steps = 0;
        }
    }
    result.iterations = settings.max_iter;
    result
}

fn factorize(qp: &StructuredQp, cb: &[Vec<Row>], it: &Iterate, work: &mut Vec<f64>) -> Option<Factor> {
    let mc = qp.coupling.len();
    let mut chol = Vec::with_capacity(qp.blocks.len());
    let mut u = Vec::with_capacity(qp.blocks.len());
    for (b, blk) in qp.blocks.iter().enumerate() {
        let n = blk.n;
        let mut h = blk.p.clone();
        for (r, row) in blk.rows.iter().enumerate() {
            let w = it.z[b][r] / it.s[b][r];
            for &(i, vi) in row {
                for &(j, vj) in row {
                    h[i * n + j] += w * vi * vj;
                }
            }
        }
        if !cholesky_regularized(&h, n, work) {
            return None;
        }
        let l = work.clone();
        let mut ub = Vec::with_capacity(mc);
        for row in &cb[b] {
            let mut col = vec![0.0; n];
            for &(k, v) in row {
                col[k] += v;
            }
            if !row.is_empty() {
                cholesky_solve(&l, n, &mut col);
            }
            ub.push(col);
        }
        chol.push(l);
        u.push(ub);
    }
    let mut schur = vec![0.0; mc * mc];
    for c in 0..mc {
        schur[c * mc + c] += qp_coupling_winv(it, c);
        for b in 0..qp.blocks.len() {
            if cb[b][c].is_empty() {
                continue;
            }
            for d in 0..mc {
                schur[c * mc + d] += row_dot(&cb[b][c], &u[b][d]);
            }
        }
    }
    if mc > 0 {
        let mut sym = schur.clone();
        for c in 0..mc {
            for d in 0..c {
                let avg = 0.5 * (sym[c * mc + d] + sym[d * mc + c]);
                sym[c * mc + d] = avg;
                sym[d * mc + c] = avg;
            }
        }
        if !cholesky_regularized(&sym, mc, work) {
            return None;
        }
        schur = work.clone();
    }
    Some(Factor { chol, u, schur })
}

fn qp_coupling_winv(it: &Iterate, c: usize) -> f64 {
    it.sc[c] / it.zc[c]
}

/// Newton direction. Local rows are eliminated into the block matrices;
/// the coupling multipliers' step is solved from the Schur complement
/// `(C H⁻¹ Cᵀ + S_c Z_c⁻¹) dz_c = C H⁻¹ r1 - r2`, which stays well
/// conditioned when a coupling row becomes active.
#[allow(clippy::too_many_arguments)]
fn direction(
    qp: &StructuredQp,
    cb: &[Vec<Row>],
    it: &Iterate,
    f: &Factor,
    rp: &[Vec<f64>],
    rpc: &[f64],
    rd: &[Vec<f64>],
    rc: &[Vec<f64>],
    rcc: &[f64],
) -> Direction {
    let nb = qp.blocks.len();
    let mc = qp.coupling.len();
    // r1 = -rd - G_Lᵀ (w∘rp - rc/s)
    let mut dx: Vec<Vec<f64>> = rd.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    for (b, blk) in qp.blocks.iter().enumerate() {
        for (r, row) in blk.rows.iter().enumerate() {
            let coef = (it.z[b][r] * rp[b][r] - rc[b][r]) / it.s[b][r];
            for &(k, v) in row {
                dx[b][k] -= v * coef;
            }
        }
        cholesky_solve(&f.chol[b], blk.n, &mut dx[b]);
    }
    let mut dzc = vec![0.0; mc];
    if mc > 0 {
        for c in 0..mc {
            let r2 = -rpc[c] + rcc[c] / it.zc[c];
            dzc[c] = (0..nb).map(|b| row_dot(&cb[b][c], &dx[b])).sum::<f64>() - r2;
        }
        cholesky_solve(&f.schur, mc, &mut dzc);
        for b in 0..nb {
            for c in 0..mc {
                if cb[b][c].is_empty() || dzc[c] == 0.0 {
                    continue;
                }
                for (x, u) in dx[b].iter_mut().zip(&f.u[b][c]) {
                    *x -= u * dzc[c];
                }
            }
        }
    }
    let dsc: Vec<f64> = (0..mc)
        .map(|c| (-rcc[c] - it.sc[c] * dzc[c]) / it.zc[c])
        .collect();
    let mut ds = Vec::with_capacity(nb);
    let mut dz = Vec::with_capacity(nb);
    for (b, blk) in qp.blocks.iter().enumerate() {
        let dsb: Vec<f64> = blk
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| -rp[b][r] - row_dot(row, &dx[b]))
            .collect();
        let dzb: Vec<f64> = (0..blk.rows.len())
            .map(|r| (-rc[b][r] - it.z[b][r] * dsb[r]) / it.s[b][r])
            .collect();
        ds.push(dsb);
        dz.push(dzb);
    }
    Direction { dx, ds, dz, dsc, dzc }
}

/// Residuals of the Newton system at direction `d`; all zero for an
/// exact solve.
#[allow(clippy::too_many_arguments)]
fn newton_residual(
    qp: &StructuredQp,
    cb: &[Vec<Row>],
    it: &Iterate,
    d: &Direction,
    rp: &[Vec<f64>],
    rpc: &[f64],
    rd: &[Vec<f64>],
    rc: &[Vec<f64>],
    rcc: &[f64],
) -> NewtonRhs {
    let mc = qp.coupling.len();
    let mut e_rd = Vec::with_capacity(qp.blocks.len());
    let mut e_rp = Vec::with_capacity(qp.blocks.len());
    let mut e_rc = Vec::with_capacity(qp.blocks.len());
    for (b, blk) in qp.blocks.iter().enumerate() {
        let n = blk.n;
        let dx = &d.dx[b];
        let mut r: Vec<f64> = (0..n)
            .map(|i| rd[b][i] + (0..n).map(|j| blk.p[i * n + j] * dx[j]).sum::<f64>())
            .collect();
        for (row, &dz) in blk.rows.iter().zip(&d.dz[b]) {
            for &(k, v) in row {
                r[k] += v * dz;
            }
        }
        for (c, row) in cb[b].iter().enumerate() {
            for &(k, v) in row {
                r[k] += v * d.dzc[c];
            }
        }
        e_rd.push(r);
        e_rp.push(
            blk.rows
                .iter()
                .enumerate()
                .map(|(r, row)| rp[b][r] + row_dot(row, dx) + d.ds[b][r])
                .collect(),
        );
        e_rc.push(
            (0..blk.rows.len())
                .map(|r| rc[b][r] + it.z[b][r] * d.ds[b][r] + it.s[b][r] * d.dz[b][r])
                .collect(),
        );
    }
    let e_rpc = (0..mc)
        .map(|c| {
            rpc[c]
                + qp.coupling[c].terms.iter().map(|&(b, k, v)| v * d.dx[b][k]).sum::<f64>()
                + d.dsc[c]
        })
        .collect();
    let e_rcc = (0..mc)
        .map(|c| rcc[c] + it.zc[c] * d.dsc[c] + it.sc[c] * d.dzc[c])
        .collect();
    NewtonRhs {
        rp: e_rp,
        rpc: e_rpc,
        rd: e_rd,
        rc: e_rc,
        rcc: e_rcc,
    }
}

struct NewtonRhs {
    rp: Vec<Vec<f64>>,
    rpc: Vec<f64>,
    rd: Vec<Vec<f64>>,
    rc: Vec<Vec<f64>>,
    rcc: Vec<f64>,
}

impl NewtonRhs {
    fn norm(&self) -> f64 {
        inf_norm(
            self.rp
                .iter()
                .chain(&self.rd)
                .chain(&self.rc)
                .flatten()
                .chain(&self.rpc)
                .chain(&self.rcc),
        )
    }
}

/// Newton direction with up to two steps of iterative refinement, which
/// recover the accuracy the factorization loses near the solution, where
/// the barrier weights spread over many orders of magnitude.
#[allow(clippy::too_many_arguments)]
fn refined_direction(
    qp: &StructuredQp,
    cb: &[Vec<Row>],
    it: &Iterate,
    f: &Factor,
    rp: &[Vec<f64>],
    rpc: &[f64],
    rd: &[Vec<f64>],
    rc: &[Vec<f64>],
    rcc: &[f64],
) -> Direction {
    let mut d = direction(qp, cb, it, f, rp, rpc, rd, rc, rcc);
    let rhs_norm = inf_norm(rp.iter().chain(rd).chain(rc).flatten().chain(rpc).chain(rcc)).max(1e-300);
    let mut err = newton_residual(qp, cb, it, &d, rp, rpc, rd, rc, rcc);
    let mut err_norm = err.norm();
    for _ in 0..2 {
        if err_norm <= 1e-14 * rhs_norm {
            break;
        }
        let corr = direction(qp, cb, it, f, &err.rp, &err.rpc, &err.rd, &err.rc, &err.rcc);
        let mut next = Direction {
            dx: add(&d.dx, &corr.dx),
            ds: add(&d.ds, &corr.ds),
            dz: add(&d.dz, &corr.dz),
            dsc: d.dsc.iter().zip(&corr.dsc).map(|(a, b)| a + b).collect(),
            dzc: d.dzc.iter().zip(&corr.dzc).map(|(a, b)| a + b).collect(),
        };
        let next_err = newton_residual(qp, cb, it, &next, rp, rpc, rd, rc, rcc);
        let next_norm = next_err.norm();
        if !(next_norm < err_norm) {
            break;
        }
        std::mem::swap(&mut d, &mut next);
        err = next_err;
        err_norm = next_norm;
    }
    d
}

fn add(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

fn max_step(it: &Iterate, d: &Direction) -> f64 {
    let mut a: f64 = 1.0 / 0.99;
    let mut upd = |v: f64, dv: f64| {
        if dv < 0.0 {
            a = a.min(-v / dv);
        }
    };
    for b in 0..it.s.len() {
        for r in 0..it.s[b].len() {
            upd(it.s[b][r], d.ds[b][r]);
            upd(it.z[b][r], d.dz[b][r]);
        }
    }
    for c in 0..it.sc.len() {
        upd(it.sc[c], d.dsc[c]);
        upd(it.zc[c], d.dzc[c]);
    }
    a.min(1.0 / 0.99)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(block: Block) -> StructuredQp {
        StructuredQp {
            blocks: vec![block],
            coupling: vec![],
        }
    }

    #[test]
    fn box_qp() {
        // min (x-2)^2 + (y+1)^2 on [0,1]^2 -> (1, 0)
        let mut b = Block::new(2);
        b.p = vec![2.0, 0.0, 0.0, 2.0];
        b.q = vec![-4.0, 2.0];
        b.push_row(vec![(0, -1.0)], 0.0);
        b.push_row(vec![(1, -1.0)], 0.0);
        b.push_row(vec![(0, 1.0)], 1.0);
        b.push_row(vec![(1, 1.0)], 1.0);
        let r = solve(&single(b), &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Solved);
        assert!((r.x[0][0] - 1.0).abs() < 1e-8);
        assert!(r.x[0][1].abs() < 1e-8);
    }

    #[test]
    fn linear_program() {
        // max x + 2y st x + y <= 1, x,y >= 0 -> y = 1
        let mut b = Block::new(2);
        b.q = vec![-1.0, -2.0];
        b.push_row(vec![(0, -1.0)], 0.0);
        b.push_row(vec![(1, -1.0)], 0.0);
        b.push_row(vec![(0, 1.0), (1, 1.0)], 1.0);
        let r = solve(&single(b), &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Solved);
        assert!((r.x[0][1] - 1.0).abs() < 1e-8);
        assert!((r.primal_obj + 2.0).abs() < 1e-8);
    }

    #[test]
    fn coupled_blocks_match_monolithic() {
        // two scalar blocks, min (x1-3)^2 + 2 (x2-3)^2 st x1 + x2 <= 2, x >= 0
        // KKT: 2(x1-3) = 4(x2-3) = -z, x1 + x2 = 2 -> x1 = 1/3, x2 = 5/3, z = 16/3
        let mk = |w: f64| {
            let mut b = Block::new(1);
            b.p = vec![2.0 * w];
            b.q = vec![-6.0 * w];
            b.push_row(vec![(0, -1.0)], 0.0);
            b
        };
        let qp = StructuredQp {
            blocks: vec![mk(1.0), mk(2.0)],
            coupling: vec![CouplingRow {
                terms: vec![(0, 0, 1.0), (1, 0, 1.0)],
                h: 2.0,
            }],
        };
        let r = solve(&qp, &IpmSettings::default());
        assert_eq!(r.status, IpmStatus::Solved);
        assert!((r.x[0][0] - 1.0 / 3.0).abs() < 1e-8);
        assert!((r.x[1][0] - 5.0 / 3.0).abs() < 1e-8);
        assert!((r.z_coupling[0] - 16.0 / 3.0).abs() < 1e-6);
    }
}
