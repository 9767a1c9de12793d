//! Exact integer symplectic-lattice algebra.
//!
//! Everything here works over arbitrary-precision integers and rationals:
//! Frobenius (symplectic Smith) reduction, dual divisors, primitivity of
//! sublattices via elementary divisors, and quadratic refinements.
//!
//! The pairing of column vectors `x`, `y` is `<x, y> = x^T B y` where `B` is
//! the stored antisymmetric matrix.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Errors raised by lattice operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LatticeError {
    /// The pairing matrix is not square or has odd size.
    BadShape,
    /// `B + B^T != 0`.
    NotAntisymmetric,
    /// `det B = 0`.
    Degenerate,
    /// Input vectors are linearly dependent over the rationals.
    DependentVectors,
    /// A vector has the wrong length for the lattice.
    LengthMismatch,
    /// Seed values must be +1 or -1.
    BadSeed,
}

impl fmt::Display for LatticeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LatticeError::BadShape => "pairing must be a square matrix of even size",
            LatticeError::NotAntisymmetric => "pairing is not antisymmetric",
            LatticeError::Degenerate => "pairing is degenerate (det = 0)",
            LatticeError::DependentVectors => "vectors are linearly dependent",
            LatticeError::LengthMismatch => "vector length does not match lattice rank",
            LatticeError::BadSeed => "refinement seeds must be +1 or -1",
        };
        f.write_str(s)
    }
}

impl core::error::Error for LatticeError {}

/// Integer column vector.
pub type IVec = Vec<BigInt>;

/// Rank-2r integer lattice with a nondegenerate antisymmetric pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymplecticLattice {
    pairing: Vec<Vec<BigInt>>,
}

impl SymplecticLattice {
    /// Validates and wraps a pairing matrix.
    pub fn new(pairing: Vec<Vec<BigInt>>) -> Result<Self, LatticeError> {
        let n = pairing.len();
        if n == 0 || n % 2 != 0 || pairing.iter().any(|row| row.len() != n) {
            return Err(LatticeError::BadShape);
        }
        for i in 0..n {
            for j in 0..n {
                if &pairing[i][j] + &pairing[j][i] != BigInt::zero() {
                    return Err(LatticeError::NotAntisymmetric);
                }
            }
        }
        if determinant(&pairing).is_zero() {
            return Err(LatticeError::Degenerate);
        }
        Ok(SymplecticLattice { pairing })
    }

    /// Convenience constructor from machine integers.
    pub fn from_i64(pairing: &[Vec<i64>]) -> Result<Self, LatticeError> {
        Self::new(
            pairing
                .iter()
                .map(|row| row.iter().map(|&x| BigInt::from(x)).collect())
                .collect(),
        )
    }

    /// The lattice rank 2r.
    pub fn rank(&self) -> usize {
        self.pairing.len()
    }

    /// The pairing matrix.
    pub fn pairing(&self) -> &[Vec<BigInt>] {
        &self.pairing
    }

    /// `<x, y> = x^T B y`.
    pub fn pair(&self, x: &[BigInt], y: &[BigInt]) -> BigInt {
        let mut acc = BigInt::zero();
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            let mut row = BigInt::zero();
            for (j, yj) in y.iter().enumerate() {
                if !yj.is_zero() && !self.pairing[i][j].is_zero() {
                    row += &self.pairing[i][j] * yj;
                }
            }
            acc += xi * row;
        }
        acc
    }

    /// The lattice transformed by the change of basis with columns `u`:
    /// the new pairing is `U^T B U`.
    pub fn transformed(&self, u: &[Vec<BigInt>]) -> Result<Self, LatticeError> {
        let n = self.rank();
        let cols: Vec<IVec> = (0..n).map(|j| (0..n).map(|i| u[i][j].clone()).collect()).collect();
        let mut out = vec![vec![BigInt::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = self.pair(&cols[i], &cols[j]);
            }
        }
        SymplecticLattice::new(out)
    }
}

/// A basis `e_1..e_r, m_1..m_r` with `<m_i, e_j> = p_i delta_ij`, all other
/// pairings zero, and `p_1 | p_2 | ... | p_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrobeniusBasis {
    /// Electric vectors `e_i`.
    pub e: Vec<IVec>,
    /// Magnetic vectors `m_i`.
    pub m: Vec<IVec>,
    /// Elementary divisors `p_i`.
    pub p: Vec<BigInt>,
}

impl FrobeniusBasis {
    /// Half rank r.
    pub fn half_rank(&self) -> usize {
        self.p.len()
    }

    /// Change-of-basis matrix with columns `e_1..e_r, m_1..m_r`.
    pub fn change_of_basis(&self) -> Vec<Vec<BigInt>> {
        let cols: Vec<&IVec> = self.e.iter().chain(self.m.iter()).collect();
        let n = cols.len();
        (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect()
    }

    /// Checks every Frobenius-basis invariant exactly against `lat`.
    pub fn check(&self, lat: &SymplecticLattice) -> bool {
        let r = self.half_rank();
        if 2 * r != lat.rank() || self.e.len() != r || self.m.len() != r {
            return false;
        }
        for i in 0..r {
            if !self.p[i].is_positive() {
                return false;
            }
            if i > 0 && !self.p[i].is_multiple_of(&self.p[i - 1]) {
                return false;
            }
            for j in 0..r {
                let want = if i == j { self.p[i].clone() } else { BigInt::zero() };
                if lat.pair(&self.m[i], &self.e[j]) != want {
                    return false;
                }
                if !lat.pair(&self.e[i], &self.e[j]).is_zero() {
                    return false;
                }
                if !lat.pair(&self.m[i], &self.m[j]).is_zero() {
                    return false;
                }
            }
        }
        determinant(&self.change_of_basis()).abs().is_one()
    }

    /// Coordinates `(a, b)` of `gamma = sum a_i e_i + b_i m_i`, read off from
    /// pairings with the basis.
    pub fn coordinates(
        &self,
        lat: &SymplecticLattice,
        gamma: &[BigInt],
    ) -> Result<(IVec, IVec), LatticeError> {
        if gamma.len() != lat.rank() {
            return Err(LatticeError::LengthMismatch);
        }
        let r = self.half_rank();
        let mut a = Vec::with_capacity(r);
        let mut b = Vec::with_capacity(r);
        for i in 0..r {
            a.push(lat.pair(&self.m[i], gamma) / &self.p[i]);
            b.push(lat.pair(gamma, &self.e[i]) / &self.p[i]);
        }
        Ok((a, b))
    }
}

/// Frobenius reduction with the deterministic pivot rule: the pair of
/// current generators with least positive `|<g, g'>|`, ties broken
/// lexicographically.
pub fn frobenius_basis(lat: &SymplecticLattice) -> Result<FrobeniusBasis, LatticeError> {
    frobenius_basis_with(lat, |_| 0)
}

/// Frobenius reduction where `choose(k)` picks which of the `k` minimal
/// candidate pivot pairs (in lexicographic order) to use.
pub fn frobenius_basis_with<F: FnMut(usize) -> usize>(
    lat: &SymplecticLattice,
    mut choose: F,
) -> Result<FrobeniusBasis, LatticeError> {
    let n = lat.rank();
    let mut gens: Vec<IVec> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut out = FrobeniusBasis { e: Vec::new(), m: Vec::new(), p: Vec::new() };

    while !gens.is_empty() {
        loop {
            let k = gens.len();
            let mut best: Option<BigInt> = None;
            let mut cands: Vec<(usize, usize, BigInt)> = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    let v = lat.pair(&gens[i], &gens[j]);
                    if v.is_zero() {
                        continue;
                    }
                    let a = v.abs();
                    match &best {
                        Some(b) if a > *b => {}
                        Some(b) if a == *b => cands.push((i, j, v)),
                        _ => {
                            best = Some(a);
                            cands.clear();
                            cands.push((i, j, v));
                        }
                    }
                }
            }
            // A nondegenerate pairing always leaves a nonzero pair.
            let Some(d) = best else { return Err(LatticeError::Degenerate) };
            let pick = choose(cands.len()) % cands.len();
            let (i, j, v) = cands.swap_remove(pick);
            let (mi, ei) = if v.is_positive() { (i, j) } else { (j, i) };

            let mut restart = false;
            for t in 0..k {
                if t == i || t == j {
                    continue;
                }
                let a = lat.pair(&gens[t], &gens[ei]);
                let b = lat.pair(&gens[t], &gens[mi]);
                let y = -a.div_floor(&d);
                let x = b.div_floor(&d);
                if !y.is_zero() || !x.is_zero() {
                    let (e, m) = (gens[ei].clone(), gens[mi].clone());
                    for (c, (ec, mc)) in gens[t].iter_mut().zip(e.iter().zip(m.iter())) {
                        *c += &x * ec + &y * mc;
                    }
                }
                if !a.mod_floor(&d).is_zero() || !b.mod_floor(&d).is_zero() {
                    restart = true;
                }
            }
            if restart {
                continue;
            }
            let rest: Vec<usize> = (0..k).filter(|&t| t != i && t != j).collect();
            'outer: for (x, &s) in rest.iter().enumerate() {
                for &t in &rest[x + 1..] {
                    if !lat.pair(&gens[s], &gens[t]).mod_floor(&d).is_zero() {
                        let add = gens[s].clone();
                        for (c, a) in gens[ei].iter_mut().zip(add.iter()) {
                            *c += a;
                        }
                        restart = true;
                        break 'outer;
                    }
                }
            }
            if restart {
                continue;
            }
            out.e.push(gens[ei].clone());
            out.m.push(gens[mi].clone());
            out.p.push(d);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            gens.remove(hi);
            gens.remove(lo);
            break;
        }
    }
    Ok(out)
}

/// The dual divisors `1/p_i` of the dual pairing.
pub fn dual_divisors(b: &FrobeniusBasis) -> Vec<BigRational> {
    b.p.iter().map(|p| BigRational::new(BigInt::one(), p.clone())).collect()
}

/// Dual divisors rescaled by `p_r`: the integers `p_r / p_i`.
pub fn rescaled_dual_divisors(b: &FrobeniusBasis) -> Vec<BigInt> {
    let Some(pr) = b.p.last() else { return Vec::new() };
    b.p.iter().map(|p| pr / p).collect()
}

/// Whether the sublattice spanned by `vectors` is primitive: all elementary
/// divisors of the coordinate matrix equal 1.
pub fn is_primitive(vectors: &[IVec], lat: &SymplecticLattice) -> Result<bool, LatticeError> {
    if vectors.iter().any(|v| v.len() != lat.rank()) {
        return Err(LatticeError::LengthMismatch);
    }
    is_primitive_in(vectors, lat.rank())
}

/// Primitivity of the span of `vectors` inside `Z^n`.
pub fn is_primitive_in(vectors: &[IVec], n: usize) -> Result<bool, LatticeError> {
    if vectors.is_empty() {
        return Ok(true);
    }
    if vectors.iter().any(|v| v.len() != n) {
        return Err(LatticeError::LengthMismatch);
    }
    let diag = smith_diagonal(vectors.to_vec());
    if diag.len() < vectors.len() || diag.iter().any(|d| d.is_zero()) {
        return Err(LatticeError::DependentVectors);
    }
    Ok(diag.iter().all(|d| d.is_one()))
}

/// Smith normal form `U A V = D` with unimodular `U`, `V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm {
    /// Nonnegative diagonal, length `min(rows, cols)`; zeros trail.
    pub diag: Vec<BigInt>,
    /// Left transform (rows x rows).
    pub u: Vec<Vec<BigInt>>,
    /// Right transform (cols x cols).
    pub v: Vec<Vec<BigInt>>,
}

impl SmithForm {
    /// Number of nonzero diagonal entries.
    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|d| !d.is_zero()).count()
    }

    /// Rows of `U` spanning the integer left kernel of `A`.
    pub fn left_kernel(&self) -> &[Vec<BigInt>] {
        &self.u[self.rank()..]
    }
}

fn identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n).map(|i| (0..n).map(|j| BigInt::from((i == j) as i64)).collect()).collect()
}

struct Snf {
    a: Vec<Vec<BigInt>>,
    u: Vec<Vec<BigInt>>,
    v: Vec<Vec<BigInt>>,
}

impl Snf {
    fn swap_rows(&mut self, x: usize, y: usize) {
        self.a.swap(x, y);
        self.u.swap(x, y);
    }

    fn swap_cols(&mut self, x: usize, y: usize) {
        if x != y {
            for row in self.a.iter_mut().chain(self.v.iter_mut()) {
                row.swap(x, y);
            }
        }
    }

    /// `row_i -= q row_t`
    fn row_sub(&mut self, i: usize, t: usize, q: &BigInt) {
        for m in [&mut self.a, &mut self.u] {
            for c in 0..m[0].len() {
                let s = q * &m[t][c];
                m[i][c] -= s;
            }
        }
    }

    /// `col_j -= q col_t`
    fn col_sub(&mut self, j: usize, t: usize, q: &BigInt) {
        for m in [&mut self.a, &mut self.v] {
            for row in m.iter_mut() {
                let s = q * &row[t];
                row[j] -= s;
            }
        }
    }
}

/// Smith normal form with transforms.
pub fn smith_form(a: Vec<Vec<BigInt>>) -> SmithForm {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let k = rows.min(cols);
    let mut s = Snf { a, u: identity(rows), v: identity(cols) };
    let mut diag = Vec::with_capacity(k);
    for t in 0..k {
        let mut best: Option<(usize, usize, BigInt)> = None;
        for i in t..rows {
            for j in t..cols {
                if !s.a[i][j].is_zero() {
                    let v = s.a[i][j].abs();
                    if best.as_ref().map_or(true, |b| v < b.2) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        let Some((bi, bj, _)) = best else {
            diag.extend(core::iter::repeat_with(BigInt::zero).take(k - t));
            break;
        };
        s.swap_rows(t, bi);
        s.swap_cols(t, bj);
        loop {
            let piv = s.a[t][t].clone();
            let mut clean = true;
            for i in t + 1..rows {
                let q = s.a[i][t].div_floor(&piv);
                if !q.is_zero() {
                    s.row_sub(i, t, &q);
                }
                clean &= s.a[i][t].is_zero();
            }
            for j in t + 1..cols {
                let q = s.a[t][j].div_floor(&piv);
                if !q.is_zero() {
                    s.col_sub(j, t, &q);
                }
                clean &= s.a[t][j].is_zero();
            }
            if !clean {
                let mut best = (t, t, s.a[t][t].abs());
                for i in t + 1..rows {
                    if !s.a[i][t].is_zero() && s.a[i][t].abs() < best.2 {
                        best = (i, t, s.a[i][t].abs());
                    }
                }
                for j in t + 1..cols {
                    if !s.a[t][j].is_zero() && s.a[t][j].abs() < best.2 {
                        best = (t, j, s.a[t][j].abs());
                    }
                }
                s.swap_rows(t, best.0);
                s.swap_cols(t, best.1);
                continue;
            }
            let mut bad = None;
            'find: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !s.a[i][j].mod_floor(&piv).is_zero() {
                        bad = Some(i);
                        break 'find;
                    }
                }
            }
            match bad {
                // row_t += row_i
                Some(i) => s.row_sub(t, i, &BigInt::from(-1)),
                None => break,
            }
        }
        if s.a[t][t].is_negative() {
            for c in 0..rows {
                s.u[t][c] = -s.u[t][c].clone();
            }
            for c in 0..cols {
                s.a[t][c] = -s.a[t][c].clone();
            }
        }
        diag.push(s.a[t][t].clone());
    }
    SmithForm { diag, u: s.u, v: s.v }
}

/// Nonnegative Smith-normal-form diagonal of an integer matrix, of length
/// `min(rows, cols)`; trailing zeros mark rank deficiency.
pub fn smith_diagonal(a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    smith_form(a).diag
}

/// A row-echelon integer basis of the lattice spanned by `rows`.
pub fn row_echelon_basis(rows: &[IVec]) -> Vec<IVec> {
    let mut m: Vec<IVec> =
        rows.iter().filter(|r| r.iter().any(|x| !x.is_zero())).cloned().collect();
    if m.is_empty() {
        return m;
    }
    let n = m[0].len();
    let mut top = 0;
    for col in 0..n {
        loop {
            let mut best: Option<usize> = None;
            for i in top..m.len() {
                if !m[i][col].is_zero()
                    && best.map_or(true, |b| m[i][col].abs() < m[b][col].abs())
                {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            m.swap(top, b);
            let mut done = true;
            for i in top + 1..m.len() {
                if m[i][col].is_zero() {
                    continue;
                }
                let q = m[i][col].div_floor(&m[top][col]);
                for c in 0..n {
                    let s = &q * &m[top][c];
                    m[i][c] -= s;
                }
                done &= m[i][col].is_zero();
            }
            if done {
                top += 1;
                break;
            }
        }
        if top == m.len() {
            break;
        }
    }
    m.truncate(top);
    m
}

/// Integer coordinates of `v` in a row-echelon basis, if `v` lies in its
/// integer span.
pub fn coordinates_in_echelon(basis: &[IVec], v: &[BigInt]) -> Option<IVec> {
    let mut rest: IVec = v.to_vec();
    let mut x = Vec::with_capacity(basis.len());
    for row in basis {
        let piv = row.iter().position(|e| !e.is_zero())?;
        let (q, r) = rest[piv].div_rem(&row[piv]);
        if !r.is_zero() {
            return None;
        }
        for (a, b) in rest.iter_mut().zip(row.iter()) {
            *a -= &q * b;
        }
        x.push(q);
    }
    if rest.iter().all(|e| e.is_zero()) { Some(x) } else { None }
}

/// Exact determinant by fraction-free (Bareiss) elimination.
pub fn determinant(a: &[Vec<BigInt>]) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut m: Vec<Vec<BigInt>> = a.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(s) = (k + 1..n).find(|&s| !m[s][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, s);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Integer square root when `x` is a perfect square.
pub fn exact_sqrt(x: &BigInt) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    let s = x.sqrt();
    if &s * &s == *x { Some(s) } else { None }
}

/// A quadratic refinement determined by its values on a Frobenius basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticRefinement {
    lattice: SymplecticLattice,
    basis: FrobeniusBasis,
    seed_e: Vec<i8>,
    seed_m: Vec<i8>,
}

/// Builds the refinement with `sigma(e_i) = seed_e[i]`, `sigma(m_i) = seed_m[i]`.
pub fn refine(
    lat: &SymplecticLattice,
    b: &FrobeniusBasis,
    seed_e: &[i8],
    seed_m: &[i8],
) -> Result<QuadraticRefinement, LatticeError> {
    let r = b.half_rank();
    if seed_e.len() != r || seed_m.len() != r {
        return Err(LatticeError::LengthMismatch);
    }
    if seed_e.iter().chain(seed_m.iter()).any(|&s| s != 1 && s != -1) {
        return Err(LatticeError::BadSeed);
    }
    Ok(QuadraticRefinement {
        lattice: lat.clone(),
        basis: b.clone(),
        seed_e: seed_e.to_vec(),
        seed_m: seed_m.to_vec(),
    })
}

impl QuadraticRefinement {
    /// Evaluates the refinement from Frobenius coordinates `(a, b)`.
    pub fn sigma_coords(&self, a: &[BigInt], b: &[BigInt]) -> i8 {
        let mut odd = false;
        for i in 0..self.basis.half_rank() {
            if (&a[i] * &b[i] * &self.basis.p[i]).is_odd() {
                odd = !odd;
            }
            if self.seed_e[i] < 0 && a[i].is_odd() {
                odd = !odd;
            }
            if self.seed_m[i] < 0 && b[i].is_odd() {
                odd = !odd;
            }
        }
        if odd { -1 } else { 1 }
    }

    /// Evaluates the refinement on a lattice vector in standard coordinates.
    pub fn sigma(&self, gamma: &[BigInt]) -> Result<i8, LatticeError> {
        let (a, b) = self.basis.coordinates(&self.lattice, gamma)?;
        Ok(self.sigma_coords(&a, &b))
    }

    /// The underlying lattice.
    pub fn lattice(&self) -> &SymplecticLattice {
        &self.lattice
    }
}

/// Parity of a machine-integer pairing value as a sign `(-1)^n`.
pub fn parity_sign(n: &BigInt) -> i8 {
    if n.is_odd() { -1 } else { 1 }
}

/// Converts a vector to `i64` when every entry fits.
pub fn to_i64_vec(v: &[BigInt]) -> Option<Vec<i64>> {
    v.iter().map(|x| x.to_i64()).collect()
}

/// Converts machine integers to a lattice vector.
pub fn ivec(v: &[i64]) -> IVec {
    v.iter().map(|&x| BigInt::from(x)).collect()
}
