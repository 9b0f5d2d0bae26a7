//! Small dense helpers: symmetrisation, symplectic forms, and an ordered
//! real Schur decomposition used to extract stable invariant subspaces.

use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix4, SMatrix, Schur};
#[allow(unused_imports)] // f64 inherent methods shadow these when std is linked
use num_traits::Float;

use crate::{Error, Result};

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Matrix8x4 = SMatrix<f64, 8, 4>;

pub(crate) fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn asymmetry<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    (m - m.transpose()).amax()
}

/// Single-mode blocks `[[0, 1], [−1, 0]]` on `(X₁, P₁)` and `(X₂, P₂)`.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 1)] = 1.0;
    j[(1, 0)] = -1.0;
    j[(2, 3)] = 1.0;
    j[(3, 2)] = -1.0;
    j
}

/// `[[0, I₄], [−I₄, 0]]`, the form preserved by Hamiltonian flows.
pub fn symplectic_form_2n() -> Matrix8 {
    let mut j = Matrix8::zeros();
    for i in 0..4 {
        j[(i, i + 4)] = 1.0;
        j[(i + 4, i)] = -1.0;
    }
    j
}

/// Inverse of a symplectic matrix, `S⁻¹ = −J Sᵀ J`.
pub(crate) fn symplectic_inverse(s: &Matrix8) -> Matrix8 {
    let j = symplectic_form_2n();
    -(j * s.transpose() * j)
}

/// 2-norm condition number of a 4×4 matrix.
pub(crate) fn condition_number(m: &Matrix4<f64>) -> f64 {
    let sv = m.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham's θ₁₃ = 5.37).
pub(crate) fn expm(a: &Matrix8) -> Matrix8 {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let norm1 = (0..8).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 5.37 { (norm1 / 5.37).log2().ceil() as i32 } else { 0 };
    let a = a * 2f64.powi(-s);
    let id = Matrix8::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u = a * (a6 * (a6 * B[13] + a4 * B[11] + a2 * B[9]) + a6 * B[7] + a4 * B[5] + a2 * B[3] + id * B[1]);
    let v = a6 * (a6 * B[12] + a4 * B[10] + a2 * B[8]) + a6 * B[6] + a4 * B[4] + a2 * B[2] + id * B[0];
    let mut r = (v - u).lu().solve(&(v + u)).unwrap_or_else(|| Matrix8::from_element(f64::NAN));
    for _ in 0..s {
        r = r * r;
    }
    r
}

/// Quasi-triangular block of a real Schur form.
#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    size: usize,
    selected: bool,
}

/// Real Schur form `A = Z T Zᵀ` whose leading diagonal blocks carry the
/// selected eigenvalues.
#[derive(Debug, Clone)]
pub(crate) struct OrderedSchur {
    pub z: DMatrix<f64>,
    #[allow(dead_code)]
    pub t: DMatrix<f64>,
    /// Dimension of the leading invariant subspace.
    pub selected_dim: usize,
}

fn block_eigenvalues(t: &DMatrix<f64>, b: &Block) -> [(f64, f64); 2] {
    let k = b.start;
    if b.size == 1 {
        return [(t[(k, k)], 0.0); 2];
    }
    let (a, bb, c, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + bb * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [(half_tr + r, 0.0), (half_tr - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [(half_tr, r), (half_tr, -r)]
    }
}

fn scan_blocks(t: &DMatrix<f64>, select: &impl Fn(f64, f64) -> bool) -> Vec<Block> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        let size = if k + 1 < n && t[(k + 1, k)] != 0.0 { 2 } else { 1 };
        let mut b = Block { start: k, size, selected: false };
        let ev = block_eigenvalues(t, &b);
        b.selected = select(ev[0].0, ev[0].1);
        blocks.push(b);
        k += size;
    }
    blocks
}

/// Apply the orthogonal similarity `Q` acting on rows/cols `k..k+m`.
fn apply_local(t: &mut DMatrix<f64>, z: &mut DMatrix<f64>, k: usize, q: &DMatrix<f64>) {
    let n = t.nrows();
    let m = q.nrows();
    let mut full = DMatrix::<f64>::identity(n, n);
    full.view_mut((k, k), (m, m)).copy_from(q);
    *t = full.transpose() * &*t * &full;
    *z = &*z * full;
}

/// Splits a 2×2 block with real eigenvalues into two 1×1 blocks.
fn split_real_pair(t: &mut DMatrix<f64>, z: &mut DMatrix<f64>, k: usize) {
    let ev = block_eigenvalues(t, &Block { start: k, size: 2, selected: false });
    let lambda = ev[0].0;
    // Eigenvector of the 2×2 block for `lambda`.
    let (a, b, c) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)]);
    let (mut x, mut y) = if b.abs() >= c.abs() { (b, lambda - a) } else { (lambda - t[(k + 1, k + 1)], c) };
    let norm = x.hypot(y);
    if norm == 0.0 {
        x = 1.0;
        y = 0.0;
    } else {
        x /= norm;
        y /= norm;
    }
    let q = DMatrix::from_row_slice(2, 2, &[x, -y, y, x]);
    apply_local(t, z, k, &q);
    t[(k + 1, k)] = 0.0;
}

/// Swaps adjacent diagonal blocks of sizes `p` (at `k`) and `q` (at `k+p`).
fn swap_blocks(t: &mut DMatrix<f64>, z: &mut DMatrix<f64>, k: usize, p: usize, q: usize) -> Result<()> {
    let m = p + q;
    let t11 = t.view((k, k), (p, p)).into_owned();
    let t22 = t.view((k + p, k + p), (q, q)).into_owned();
    let t12 = t.view((k, k + p), (p, q)).into_owned();

    // Sylvester equation T11 X − X T22 = T12 in Kronecker form.
    let dim = p * q;
    let mut kron = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..q {
        for i in 0..p {
            let row = j * p + i;
            for l in 0..q {
                for kk in 0..p {
                    let col = l * p + kk;
                    let mut v = 0.0;
                    if j == l {
                        v += t11[(i, kk)];
                    }
                    if i == kk {
                        v -= t22[(l, j)];
                    }
                    kron[(row, col)] = v;
                }
            }
        }
    }
    let rhs = DMatrix::from_iterator(dim, 1, t12.iter().copied());
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Schur block swap: blocks share eigenvalues"))?;
    let x = DMatrix::from_iterator(p, q, sol.iter().copied());

    // span [X; −I] is invariant with the spectrum of T22; complete it to a
    // nonsingular square matrix and orthogonalise.
    let mut basis = DMatrix::<f64>::zeros(m, m);
    basis.view_mut((0, 0), (p, q)).copy_from(&x);
    for i in 0..q {
        basis[(p + i, i)] = -1.0;
    }
    for i in 0..p {
        basis[(i, q + i)] = 1.0;
    }
    let qmat = basis.qr().q();
    apply_local(t, z, k, &qmat);
    for r in (k + q)..(k + m) {
        for c in k..(k + q) {
            t[(r, c)] = 0.0;
        }
    }
    Ok(())
}

/// Fixed orthogonal matrix used to perturb the QR iteration path.
fn scrambler(n: usize) -> DMatrix<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let m = DMatrix::from_fn(n, n, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    m.qr().q()
}

/// Real Schur form `a = Z T Zᵀ`.
///
/// The shifted QR iteration can stall on highly structured input (exactly
/// repeated or defective eigenvalues). On failure the decomposition is
/// retried on `QᵀaQ` for a fixed orthogonal `Q` and mapped back.
pub(crate) fn real_schur(a: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if let Some(schur) = Schur::try_new(a.clone(), f64::EPSILON, 10_000) {
        return Ok(schur.unpack());
    }
    let q = scrambler(a.nrows());
    let rotated = q.transpose() * a * &q;
    let (z, t) = Schur::try_new(rotated, f64::EPSILON, 10_000).ok_or(Error::SchurFailed)?.unpack();
    Ok((q * z, t))
}

/// Eigenvalues `(re, im)` of a square matrix from its real Schur form.
pub(crate) fn eigenvalues(a: DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let (_, t) = real_schur(a)?;
    let mut out = Vec::with_capacity(t.nrows());
    for b in scan_blocks(&t, &|_, _| false) {
        let ev = block_eigenvalues(&t, &b);
        out.extend_from_slice(&ev[..b.size]);
    }
    Ok(out)
}

/// Real Schur decomposition of `a` reordered so that eigenvalues satisfying
/// `select(re, im)` come first.
pub(crate) fn ordered_schur(a: DMatrix<f64>, select: impl Fn(f64, f64) -> bool) -> Result<OrderedSchur> {
    let n = a.nrows();
    let (mut z, mut t) = real_schur(a)?;

    // Normalise: no real-eigenvalue 2×2 blocks.
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)] != 0.0 {
            let ev = block_eigenvalues(&t, &Block { start: k, size: 2, selected: false });
            if ev[0].1 == 0.0 {
                split_real_pair(&mut t, &mut z, k);
                k += 1;
                continue;
            }
            k += 2;
        } else {
            k += 1;
        }
    }

    let mut blocks = scan_blocks(&t, &select);
    // Bubble each selected block up past the unselected ones before it.
    let mut target = 0;
    for idx in 0..blocks.len() {
        if !blocks[idx].selected {
            continue;
        }
        let mut pos = idx;
        while pos > target {
            let (prev, cur) = (blocks[pos - 1], blocks[pos]);
            swap_blocks(&mut t, &mut z, prev.start, prev.size, cur.size)?;
            blocks[pos - 1] = Block { start: prev.start, size: cur.size, selected: true };
            blocks[pos] = Block { start: prev.start + cur.size, size: prev.size, selected: false };
            pos -= 1;
        }
        target += 1;
    }
    let selected_dim = blocks.iter().filter(|b| b.selected).map(|b| b.size).sum();
    Ok(OrderedSchur { z, t, selected_dim })
}

/// Orthonormal basis of the invariant subspace of `s` belonging to the
/// eigenvalues strictly inside the unit disk.
pub(crate) fn stable_subspace(s: &Matrix8) -> Result<Matrix8x4> {
    let dm = DMatrix::from_iterator(8, 8, s.iter().copied());
    let ord = ordered_schur(dm, |re, im| re * re + im * im < 1.0)?;
    if ord.selected_dim != 4 {
        return Err(Error::NoStableSubspace { dim: ord.selected_dim, expected: 4 });
    }
    Ok(Matrix8x4::from_fn(|i, j| ord.z[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        DMatrix::from_fn(n, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn ordered_schur_puts_selected_first() {
        for seed in 0..20u64 {
            let a = pseudo_random(8, seed) * 1.2;
            let ord = ordered_schur(a.clone(), |re, im| re * re + im * im < 0.5).unwrap();
            // Reconstruction.
            let recon = &ord.z * &ord.t * ord.z.transpose();
            assert!((recon - &a).amax() < 1e-10, "seed {seed}");
            // Orthogonality.
            let ztz = ord.z.transpose() * &ord.z;
            assert!((ztz - DMatrix::<f64>::identity(8, 8)).amax() < 1e-12);
            // Leading block invariant: A Z1 = Z1 T11.
            let d = ord.selected_dim;
            let z1 = ord.z.columns(0, d).into_owned();
            let t11 = ord.t.view((0, 0), (d, d)).into_owned();
            assert!((&a * &z1 - &z1 * t11).amax() < 1e-10);
            // Selected count matches the spectrum.
            let expected = a
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.norm_sqr() < 0.5)
                .count();
            assert_eq!(d, expected, "seed {seed}");
        }
    }

    #[test]
    fn expm_matches_reference() {
        for (seed, scale) in [(1u64, 0.01), (2, 0.5), (3, 3.0), (4, 20.0)] {
            let d = pseudo_random(8, seed) * scale;
            let a = Matrix8::from_fn(|i, j| d[(i, j)]);
            let reference = a.exp();
            assert!((expm(&a) - reference).amax() < 1e-12 * reference.amax(), "seed {seed}");
        }
        let z = Matrix8::zeros();
        assert_eq!(expm(&z), Matrix8::identity());
    }

    #[test]
    fn schur_survives_structured_input() {
        // Exact repeated frequencies and a real saddle stall the plain QR
        // iteration; the fallback must still produce a valid decomposition.
        for g in [-0.5, -0.25, 0.0] {
            #[rustfmt::skip]
            let a = DMatrix::from_row_slice(4, 4, &[
                0.0, 1.0, 0.0, 0.0,
                -1.0 - 2.0 * g, 0.0, 2.0 * g, 0.0,
                0.0, 0.0, 0.0, 1.0,
                2.0 * g, 0.0, -1.0 - 2.0 * g, 0.0,
            ]);
            let (z, t) = real_schur(a.clone()).unwrap();
            assert!((&z * &t * z.transpose() - &a).amax() < 1e-12);
            let mut ev = eigenvalues(a).unwrap();
            ev.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            assert_eq!(ev.len(), 4);
            if g == -0.5 {
                // Relative mode stiffness 1 + 4g = −1: λ = ±1.
                assert!((ev[0].0 + 1.0).abs() < 1e-12 && (ev[3].0 - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symplectic_inverse_matches_lu() {
        // exp of a Hamiltonian matrix is symplectic.
        let h4 = pseudo_random(4, 3);
        let s4 = pseudo_random(4, 4);
        let sym = &s4 + s4.transpose();
        let s2 = pseudo_random(4, 5);
        let sym2 = &s2 + s2.transpose();
        let mut h = Matrix8::zeros();
        for i in 0..4 {
            for j in 0..4 {
                h[(i, j)] = h4[(j, i)];
                h[(i, j + 4)] = -sym[(i, j)];
                h[(i + 4, j)] = -sym2[(i, j)];
                h[(i + 4, j + 4)] = -h4[(i, j)];
            }
        }
        let s = (h * 0.3).exp();
        let inv = s.try_inverse().unwrap();
        assert!((symplectic_inverse(&s) - inv).amax() < 1e-10);
    }
}
