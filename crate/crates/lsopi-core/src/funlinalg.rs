//! Linear algebra over the field of rational functions.
//!
//! Ranks are computed symbolically by fraction-free Bareiss elimination on a
//! denominator-cleared integer-polynomial matrix; that result is
//! authoritative. A seeded rational sampler independently evaluates the
//! matrix at generic points and the best pointwise rank must agree with the
//! symbolic one, otherwise a genericity error is raised. Sample streams are
//! derived from the sampler seed plus a content fingerprint of the matrix,
//! so results do not depend on call order or scheduling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::symcore::{Point, Poly, RatFun};

/// Deterministic sampling configuration.
///
/// Coordinates are uniform rationals with numerator in `[-10^6, 10^6]` and
/// denominator in `[1, 10^3]`. Points at which some matrix entry is
/// undefined are rejected and redrawn, up to `budget` rejections per call.
#[derive(Clone, Copy, Debug)]
pub struct Sampler {
    pub seed: u64,
    pub samples: usize,
    pub budget: usize,
}

impl Sampler {
    pub fn new(seed: u64, samples: usize) -> Sampler {
        Sampler {
            seed,
            samples,
            budget: 20,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn rng_for(&self, fingerprint: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ fingerprint.rotate_left(17))
    }

    fn draw_point(rng: &mut ChaCha8Rng, arity: usize) -> Point {
        let coords = (0..arity)
            .map(|_| {
                let n: i64 = rng.random_range(-1_000_000..=1_000_000);
                let d: i64 = rng.random_range(1..=1_000);
                BigRational::new(BigInt::from(n), BigInt::from(d))
            })
            .collect();
        Point(coords)
    }
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::new(42, 5)
    }
}

/// Dense matrix of rational functions, row major.
#[derive(Clone, Debug)]
pub struct FunMatrix {
    rows: usize,
    cols: usize,
    arity: usize,
    data: Vec<RatFun>,
}

impl FunMatrix {
    pub fn new(rows: usize, cols: usize, arity: usize, data: Vec<RatFun>) -> Result<FunMatrix> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(FunMatrix {
            rows,
            cols,
            arity,
            data,
        })
    }

    pub fn zero(rows: usize, cols: usize, arity: usize) -> FunMatrix {
        FunMatrix {
            rows,
            cols,
            arity,
            data: vec![RatFun::zero(arity); rows * cols],
        }
    }

    /// Build from column vectors (each of length `rows`).
    pub fn from_columns(rows: usize, arity: usize, cols: &[Vec<RatFun>]) -> Result<FunMatrix> {
        for c in cols {
            if c.len() != rows {
                return Err(Error::Dimension(format!(
                    "column length {} does not match row count {}",
                    c.len(),
                    rows
                )));
            }
        }
        let ncols = cols.len();
        let mut data = Vec::with_capacity(rows * ncols);
        for r in 0..rows {
            for c in cols {
                data.push(c[r].clone());
            }
        }
        Ok(FunMatrix {
            rows,
            cols: ncols,
            arity,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn at(&self, r: usize, c: usize) -> &RatFun {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: RatFun) {
        self.data[r * self.cols + c] = v;
    }

    /// Concatenate columns of `other` to the right.
    pub fn hstack(&self, other: &FunMatrix) -> Result<FunMatrix> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "cannot hstack {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                data.push(self.at(r, c).clone());
            }
            for c in 0..other.cols {
                data.push(other.at(r, c).clone());
            }
        }
        Ok(FunMatrix {
            rows: self.rows,
            cols,
            arity: self.arity,
            data,
        })
    }

    pub fn column(&self, c: usize) -> Vec<RatFun> {
        (0..self.rows).map(|r| self.at(r, c).clone()).collect()
    }

    fn fingerprint(&self) -> u64 {
        let mut acc: u64 = 0xcbf29ce484222325;
        for d in [self.rows as u64, self.cols as u64, self.arity as u64] {
            acc ^= d;
            acc = acc.wrapping_mul(0x100000001b3);
        }
        for e in &self.data {
            e.fingerprint_into(&mut acc);
        }
        acc
    }

    /// Clear denominators row by row, producing an integer-polynomial
    /// matrix with the same rank.
    fn cleared(&self) -> Vec<Vec<Poly>> {
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut l = Poly::one(self.arity);
            for c in 0..self.cols {
                let den = self.at(r, c).den();
                let g = l.gcd(den);
                l = l.mul(&den.div_exact(&g).expect("gcd divides"));
            }
            let mut row = Vec::with_capacity(self.cols);
            for c in 0..self.cols {
                let e = self.at(r, c);
                let factor = l.div_exact(e.den()).expect("lcm divisible by denominator");
                row.push(e.num().mul(&factor));
            }
            out.push(row);
        }
        out
    }

    /// Evaluate every entry at a point; `None` if any entry is undefined.
    fn eval_at(&self, p: &Point) -> Option<Vec<Vec<BigRational>>> {
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut row = Vec::with_capacity(self.cols);
            for c in 0..self.cols {
                match self.at(r, c).eval(p.coords()) {
                    Ok(v) => row.push(v),
                    Err(_) => return None,
                }
            }
            out.push(row);
        }
        Some(out)
    }
}

/// Rank of an exact rational matrix by Gaussian elimination.
pub fn rational_rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        let pivot = (row..rows).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else { continue };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for c in col..cols {
            let v = &m[row][c] * &inv;
            m[row][c] = v;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..cols {
                    let v = &m[r][c] - &f * &m[row][c];
                    m[r][c] = v;
                }
            }
        }
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

/// Symbolic rank by fraction-free Bareiss elimination with full pivoting.
/// Pivots are chosen by lowest total degree (ties: smallest column, then
/// smallest row) to control coefficient growth deterministically.
/// Hard ceilings on intermediate entry size during symbolic elimination.
/// Exact multivariate arithmetic can grow explosively on unstructured
/// input; beyond these ceilings the computation is abandoned with a
/// genericity error instead of being allowed to thrash.
const MAX_ENTRY_TERMS: usize = 300;
const MAX_ENTRY_DEGREE: u32 = 16;

fn oversized_poly(p: &Poly) -> bool {
    p.num_terms() > MAX_ENTRY_TERMS || p.total_degree() > MAX_ENTRY_DEGREE
}

pub(crate) fn oversized_fun(f: &RatFun) -> bool {
    f.num().num_terms() + f.den().num_terms() > MAX_ENTRY_TERMS
        || f.num().total_degree().max(f.den().total_degree()) > MAX_ENTRY_DEGREE
}

pub(crate) fn budget_error(site: &str) -> Error {
    Error::Genericity(format!(
        "symbolic computation abandoned during {}: intermediate expressions grew past \
         {} terms or total degree {}",
        site, MAX_ENTRY_TERMS, MAX_ENTRY_DEGREE
    ))
}

fn bareiss_rank(mut m: Vec<Vec<Poly>>) -> Result<usize> {
    let rows = m.len();
    if rows == 0 {
        return Ok(0);
    }
    let cols = m[0].len();
    let arity = m[0].first().map(Poly::arity).unwrap_or(0);
    if cols == 0 {
        return Ok(0);
    }
    // Every update multiplies two matrix entries, so bounding the entries
    // up front bounds the cost of every later step.
    if m.iter().flatten().any(oversized_poly) {
        return Err(budget_error("a fraction-free rank computation"));
    }
    let mut prev = Poly::one(arity);
    let mut k = 0;
    loop {
        // Deterministic pivot search over the remaining submatrix.
        let mut best: Option<(u32, usize, usize)> = None;
        for c in k..cols {
            for r in k..rows {
                if m[r][c].is_zero() {
                    continue;
                }
                let d = m[r][c].total_degree();
                let cand = (d, c, r);
                if best.map(|b| cand < b).unwrap_or(true) {
                    best = Some(cand);
                }
            }
        }
        let Some((_, pc, pr)) = best else { return Ok(k) };
        m.swap(k, pr);
        for row in m.iter_mut() {
            row.swap(k, pc);
        }
        for r in (k + 1)..rows {
            for c in (k + 1)..cols {
                let t = m[r][c]
                    .mul(&m[k][k])
                    .sub(&m[r][k].mul(&m[k][c]));
                let entry = t
                    .div_exact(&prev)
                    .expect("Bareiss division is exact");
                if oversized_poly(&entry) {
                    return Err(budget_error("a fraction-free rank computation"));
                }
                m[r][c] = entry;
            }
            m[r][k] = Poly::zero(arity);
        }
        prev = m[k][k].clone();
        k += 1;
        if k == rows || k == cols {
            return Ok(k);
        }
    }
}

/// Generic rank over the rational-function field.
///
/// The symbolic Bareiss rank is authoritative; the sampler must reproduce
/// it at at least one of its generic evaluation points, otherwise a
/// genericity error is returned.
pub fn generic_rank(m: &FunMatrix, smp: &Sampler) -> Result<usize> {
    if m.rows == 0 || m.cols == 0 {
        return Ok(0);
    }
    let symbolic = bareiss_rank(m.cleared())?;
    if symbolic == 0 {
        // All entries are identically zero; nothing to sample.
        return Ok(0);
    }
    let mut rng = smp.rng_for(m.fingerprint());
    let mut rejected = 0;
    let mut evaluated = 0;
    let mut best = 0;
    while evaluated < smp.samples {
        let p = Sampler::draw_point(&mut rng, m.arity);
        match m.eval_at(&p) {
            Some(vals) => {
                evaluated += 1;
                best = best.max(rational_rank(vals));
                if best == symbolic {
                    // Agreement reached; no need to keep sampling.
                    return Ok(symbolic);
                }
            }
            None => {
                rejected += 1;
                if rejected > smp.budget {
                    return Err(Error::Genericity(format!(
                        "exceeded resample budget ({}) while seeking points where all \
                         matrix entries are defined",
                        smp.budget
                    )));
                }
            }
        }
    }
    if best > symbolic {
        return Err(Error::Internal(format!(
            "pointwise rank {} exceeds symbolic rank {}",
            best, symbolic
        )));
    }
    Err(Error::Genericity(format!(
        "sampled rank {} disagrees with symbolic rank {} after {} samples",
        best, symbolic, evaluated
    )))
}

/// Result of a reduced row-echelon elimination over the function field.
struct Echelon {
    /// Reduced matrix.
    m: Vec<Vec<RatFun>>,
    /// `(eliminated-row, column)` pairs in order.
    pivots: Vec<(usize, usize)>,
}

fn gauss_jordan(mut m: Vec<Vec<RatFun>>) -> Result<Echelon> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    // As in the fraction-free pass: bounded entries keep each update cheap,
    // so reject oversized input up front rather than mid-elimination.
    if m.iter().flatten().any(oversized_fun) {
        return Err(budget_error("a row reduction over the function field"));
    }
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        // Choose the lowest-degree nonzero pivot in this column for
        // determinism and to limit growth.
        let mut best: Option<(u32, usize)> = None;
        for r in row..rows {
            if m[r][col].is_zero() {
                continue;
            }
            let cand = (m[r][col].degree_weight(), r);
            if best.map(|b| cand < b).unwrap_or(true) {
                best = Some(cand);
            }
        }
        let Some((_, p)) = best else { continue };
        m.swap(row, p);
        let inv = m[row][col].inv()?;
        for c in col..cols {
            let v = m[row][c].mul(&inv);
            if oversized_fun(&v) {
                return Err(budget_error("a row reduction over the function field"));
            }
            m[row][c] = v;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..cols {
                    let v = m[r][c].sub(&f.mul(&m[row][c]));
                    if oversized_fun(&v) {
                        return Err(budget_error("a row reduction over the function field"));
                    }
                    m[r][c] = v;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    Ok(Echelon { m, pivots })
}

/// Like [`clear_denominators`], additionally returning the scalar factor
/// `c` with `cleared = c * original` (1 for the zero vector).
pub fn clear_denominators_with_factor(v: &[RatFun]) -> (Vec<RatFun>, RatFun) {
    if v.is_empty() {
        return (Vec::new(), RatFun::one(0));
    }
    let arity = v[0].arity();
    let cleared = clear_denominators(v);
    // Recover the factor from the first nonzero coordinate.
    let factor = match v.iter().position(|e| !e.is_zero()) {
        Some(i) => cleared[i]
            .div(&v[i])
            .expect("nonzero original coordinate"),
        None => RatFun::one(arity),
    };
    (cleared, factor)
}

/// Normalize a function vector to a primitive integer-polynomial vector
/// (clear denominators, remove common polynomial and integer content).
pub fn clear_denominators(v: &[RatFun]) -> Vec<RatFun> {
    if v.is_empty() {
        return Vec::new();
    }
    let arity = v[0].arity();
    let mut l = Poly::one(arity);
    for e in v {
        let g = l.gcd(e.den());
        l = l.mul(&e.den().div_exact(&g).expect("gcd divides"));
    }
    let mut nums: Vec<Poly> = v
        .iter()
        .map(|e| {
            e.num()
                .mul(&l.div_exact(e.den()).expect("lcm divisible"))
        })
        .collect();
    // Remove common polynomial content across the vector.
    let mut g = Poly::zero(arity);
    for n in &nums {
        if n.is_zero() {
            continue;
        }
        g = if g.is_zero() { n.clone() } else { g.gcd(n) };
        if g.is_one() {
            break;
        }
    }
    if !g.is_zero() && !g.is_one() {
        for n in nums.iter_mut() {
            *n = n.div_exact(&g).expect("content divides");
        }
    }
    // Sign: make the first nonzero entry have positive leading coefficient.
    if let Some(first) = nums.iter().position(|n| !n.is_zero()) {
        if !nums[first].leading_coeff_sign_positive() {
            for n in nums.iter_mut() {
                *n = n.neg();
            }
        }
    }
    nums.into_iter().map(RatFun::from_poly).collect()
}

/// Basis of the right kernel `{ c : M c = 0 }` over the function field.
///
/// Vectors are returned denominator-cleared and primitive, ordered by the
/// free column they correspond to (ascending), so the output is
/// deterministic. `rank + kernel-dimension = cols` always holds.
pub fn kernel_basis(m: &FunMatrix, _smp: &Sampler) -> Result<Vec<Vec<RatFun>>> {
    if m.cols == 0 {
        return Ok(Vec::new());
    }
    let grid: Vec<Vec<RatFun>> = (0..m.rows)
        .map(|r| (0..m.cols).map(|c| m.at(r, c).clone()).collect())
        .collect();
    let ech = gauss_jordan(grid)?;
    let pivot_cols: Vec<usize> = ech.pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in 0..m.cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![RatFun::zero(m.arity); m.cols];
        v[free] = RatFun::one(m.arity);
        for &(r, pc) in &ech.pivots {
            v[pc] = ech.m[r][free].neg();
        }
        let v = clear_denominators(&v);
        basis.push(v);
    }
    // Internal soundness check: every basis vector annihilates M. The
    // accumulator is size-gated like the eliminations feeding it.
    for v in &basis {
        for r in 0..m.rows {
            let mut acc = RatFun::zero(m.arity);
            for c in 0..m.cols {
                acc = acc.add(&m.at(r, c).mul(&v[c]));
                if oversized_fun(&acc) {
                    return Err(budget_error("a kernel-basis verification"));
                }
            }
            if !acc.is_zero() {
                return Err(Error::Internal(
                    "kernel vector fails to annihilate the matrix".into(),
                ));
            }
        }
    }
    Ok(basis)
}

/// Solve `cols * c = v` over the function field. Returns `None` when `v`
/// is not in the column span. A returned solution is re-verified exactly.
pub fn solve_membership(
    v: &[RatFun],
    m: &FunMatrix,
    _smp: &Sampler,
) -> Result<Option<Vec<RatFun>>> {
    if v.len() != m.rows {
        return Err(Error::Dimension(format!(
            "vector length {} does not match row count {}",
            v.len(),
            m.rows
        )));
    }
    if m.rows == 0 {
        return Ok(Some(vec![RatFun::zero(m.arity); m.cols]));
    }
    let mut grid: Vec<Vec<RatFun>> = (0..m.rows)
        .map(|r| {
            let mut row: Vec<RatFun> = (0..m.cols).map(|c| m.at(r, c).clone()).collect();
            row.push(v[r].clone());
            row
        })
        .collect();
    if grid.iter().flatten().any(oversized_fun) {
        return Err(budget_error("a membership elimination"));
    }
    // Eliminate only on the first `cols` columns; the last column is the
    // right-hand side.
    let rows = grid.len();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m.cols {
        if row == rows {
            break;
        }
        let mut best: Option<(u32, usize)> = None;
        for r in row..rows {
            if grid[r][col].is_zero() {
                continue;
            }
            let cand = (grid[r][col].degree_weight(), r);
            if best.map(|b| cand < b).unwrap_or(true) {
                best = Some(cand);
            }
        }
        let Some((_, p)) = best else { continue };
        grid.swap(row, p);
        let inv = grid[row][col].inv()?;
        for c in col..=m.cols {
            let val = grid[row][c].mul(&inv);
            if oversized_fun(&val) {
                return Err(budget_error("a membership elimination"));
            }
            grid[row][c] = val;
        }
        for r in 0..rows {
            if r != row && !grid[r][col].is_zero() {
                let f = grid[r][col].clone();
                for c in col..=m.cols {
                    let val = grid[r][c].sub(&f.mul(&grid[row][c]));
                    if oversized_fun(&val) {
                        return Err(budget_error("a membership elimination"));
                    }
                    grid[r][c] = val;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    // Inconsistent iff a zero row of the coefficient part has nonzero RHS.
    for r in 0..rows {
        let coef_zero = (0..m.cols).all(|c| grid[r][c].is_zero());
        if coef_zero && !grid[r][m.cols].is_zero() {
            return Ok(None);
        }
    }
    let mut c = vec![RatFun::zero(m.arity); m.cols];
    for &(r, pc) in &pivots {
        c[pc] = grid[r][m.cols].clone();
    }
    // Exact verification. The accumulator is size-gated: reductions can be
    // degraded under the polynomial gcd gate, so sums may stay unreduced.
    for r in 0..m.rows {
        let mut acc = RatFun::zero(m.arity);
        for cc in 0..m.cols {
            acc = acc.add(&m.at(r, cc).mul(&c[cc]));
            if oversized_fun(&acc) {
                return Err(budget_error("a membership verification"));
            }
        }
        if !acc.sub(&v[r]).is_zero() {
            return Err(Error::Internal(
                "membership solution fails verification".into(),
            ));
        }
    }
    Ok(Some(c))
}
