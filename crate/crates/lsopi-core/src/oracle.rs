//! Independent brute-force cross-validators for the decision engine:
//! pointwise characteristic spaces by exact rational linear algebra,
//! a discretized sweep over candidate corank-one subdistributions, and a
//! bounded-depth breadth-first search over raw prolongation trees.
//!
//! Everything here is deliberately simple and independent of the symbolic
//! machinery it checks: ranks and memberships are computed by Gaussian
//! elimination over exact rationals at explicit sample points.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::funlinalg::Sampler;
use crate::geometry::{
    ad, is_sfl, lie_bracket, linearizability_sequence, non_involutivity_index,
    ControlAffineSystem, Distribution, VectorField,
};
use crate::symcore::RatFun;

/// Deterministic list of rational sample points.
pub fn sample_points(arity: usize, count: usize, seed: u64) -> Vec<Vec<BigRational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..count)
        .map(|_| {
            (0..arity)
                .map(|_| {
                    let n: i64 = rng.random_range(-1000..=1000);
                    let d: i64 = rng.random_range(1..=40);
                    BigRational::new(BigInt::from(n), BigInt::from(d))
                })
                .collect()
        })
        .collect()
}

/// Evaluate a vector field at a point.
pub fn eval_field(v: &VectorField, p: &[BigRational]) -> Result<Vec<BigRational>> {
    v.comps().iter().map(|c| c.eval(p)).collect()
}

/// Row-reduce a list of column vectors in place; returns the rank.
/// Rank of a list of rational vectors. Plain fraction arithmetic, no
/// pivoting subtleties needed over exact rationals.
pub fn rank_of(columns: &[Vec<BigRational>]) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let rows = columns[0].len();
    // Work on the transpose: each column becomes a row to reduce.
    let mut m: Vec<Vec<BigRational>> = columns.to_vec();
    let mut rank = 0;
    for col in 0..rows {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = m[rank][col].recip();
        for x in m[rank].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..m.len() {
            if r != rank && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in 0..rows {
                    let delta = &m[rank][c] * &factor;
                    m[r][c] = &m[r][c] - &delta;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Membership of `v` in the span of `columns`, exactly.
pub fn in_span(columns: &[Vec<BigRational>], v: &[BigRational]) -> bool {
    if v.iter().all(|x| x.is_zero()) {
        return true;
    }
    let mut extended = columns.to_vec();
    extended.push(v.to_vec());
    rank_of(columns) == rank_of(&extended)
}

/// Basis of the kernel of the linear map sending `a` to `M a`, where the
/// columns of `M` are given. Exact reduced row echelon over the rationals.
fn kernel_of_columns(columns: &[Vec<BigRational>], rows: usize) -> Vec<Vec<BigRational>> {
    let cols = columns.len();
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|r| (0..cols).map(|c| columns[c][r].clone()).collect())
        .collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for x in m[row].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in 0..cols {
                    let delta = &m[row][c] * &factor;
                    m[r][c] = &m[r][c] - &delta;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -m[r][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Pointwise characteristic space of a distribution at a point: all
/// combinations `sum a_i g_i(p)` whose brackets with every generator stay
/// inside `D(p)`.
///
/// Returns a basis of that subspace of the tangent space at `p`.
pub fn pointwise_characteristic(
    d: &Distribution,
    p: &[BigRational],
) -> Result<Vec<Vec<BigRational>>> {
    let gens = d.gens();
    if gens.is_empty() {
        return Ok(Vec::new());
    }
    let n = p.len();
    let g_at: Vec<Vec<BigRational>> = gens
        .iter()
        .map(|g| eval_field(g, p))
        .collect::<Result<_>>()?;
    // Covectors annihilating D(p): kernel of the transpose.
    let transpose: Vec<Vec<BigRational>> = (0..n)
        .map(|r| (0..gens.len()).map(|c| g_at[c][r].clone()).collect())
        .collect();
    let annihilators = kernel_of_columns(&transpose, gens.len());
    // (Each annihilator is a covector w with w . g(p) = 0 for all gens.)
    let mut constraint_cols: Vec<Vec<BigRational>> = vec![Vec::new(); gens.len()];
    for (i, gi) in gens.iter().enumerate() {
        for gj in gens.iter() {
            let br = lie_bracket(gi, gj);
            let br_at = eval_field(&br, p)?;
            for w in &annihilators {
                let dot: BigRational = w
                    .iter()
                    .zip(&br_at)
                    .map(|(a, b)| a * b)
                    .fold(BigRational::zero(), |acc, x| acc + x);
                constraint_cols[i].push(dot);
            }
        }
    }
    let rows = constraint_cols[0].len();
    let coeff_basis = if rows == 0 {
        // Full-rank distribution: no constraints, everything characteristic.
        (0..gens.len())
            .map(|i| {
                let mut v = vec![BigRational::zero(); gens.len()];
                v[i] = BigRational::one();
                v
            })
            .collect()
    } else {
        kernel_of_columns(&constraint_cols, rows)
    };
    // Map coefficient vectors through the generators and keep an
    // independent set.
    let mut out: Vec<Vec<BigRational>> = Vec::new();
    for a in coeff_basis {
        let mut v = vec![BigRational::zero(); n];
        for (i, col) in g_at.iter().enumerate() {
            for r in 0..n {
                let add = &col[r] * &a[i];
                v[r] = &v[r] + &add;
            }
        }
        if !v.iter().all(|x| x.is_zero()) && !in_span(&out, &v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// One step of a brute-force prolongation sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LsopStep {
    /// Which control was prolonged (1 or 2).
    pub control: usize,
    /// Index into the feedback family, when a preliminary feedback was
    /// applied before prolonging (the family entry is a column
    /// `(b21, b22)` defining the kept direction `b21 g1 + b22 g2`).
    pub feedback: Option<usize>,
}

/// A witness that the system becomes static feedback linearizable after a
/// sequence of one-fold prolongations.
#[derive(Clone, Debug)]
pub struct LsopWitness {
    pub steps: Vec<LsopStep>,
    /// The final (linearizable) system.
    pub system: ControlAffineSystem,
    /// The level at which the final system's filtration fills the tangent
    /// space.
    pub rho: usize,
}

/// Raw one-fold prolongation of one control, without preliminary feedback:
/// the chosen control becomes a state feeding its own input field.
fn raw_prolong(sys: &ControlAffineSystem, control: usize, step: usize) -> Result<ControlAffineSystem> {
    let n = sys.dim();
    let mut state_name = format!("u{}_{}", control, step);
    while sys.vars().index_of(&state_name).is_some() {
        state_name.push('_');
    }
    let new_vars = sys.vars().with_appended(&state_name);
    let u = RatFun::var(n + 1, n);
    let (pro, keep) = if control == 1 {
        (sys.g1(), sys.g2())
    } else {
        (sys.g2(), sys.g1())
    };
    let drift = sys.f().lifted(&new_vars).add(&pro.lifted(&new_vars).scale(&u));
    ControlAffineSystem::new(
        format!("{}.r{}", sys.name, step + 1),
        new_vars.clone(),
        drift,
        VectorField::unit(new_vars.clone(), n),
        keep.lifted(&new_vars),
    )
}

/// Prolongation after a preliminary feedback given by a column
/// `(b21, b22)`: the kept second input is `b21 g1 + b22 g2` and the
/// prolonged direction is `g1` when `b22` is nonzero, `g2` otherwise.
fn feedback_prolong(
    sys: &ControlAffineSystem,
    beta: &(RatFun, RatFun),
    step: usize,
) -> Result<ControlAffineSystem> {
    let n = sys.dim();
    let tilde = sys.g1().scale(&beta.0).add(&sys.g2().scale(&beta.1));
    if tilde.is_zero() {
        return Err(Error::Validation("zero feedback column".into()));
    }
    let pro = if beta.1.is_zero() { sys.g2() } else { sys.g1() };
    let mut state_name = format!("u1_{}", step);
    while sys.vars().index_of(&state_name).is_some() {
        state_name.push('_');
    }
    let new_vars = sys.vars().with_appended(&state_name);
    let u = RatFun::var(n + 1, n);
    let drift = sys.f().lifted(&new_vars).add(&pro.lifted(&new_vars).scale(&u));
    ControlAffineSystem::new(
        format!("{}.r{}", sys.name, step + 1),
        new_vars.clone(),
        drift,
        VectorField::unit(new_vars.clone(), n),
        tilde.lifted(&new_vars),
    )
}

/// Breadth-first search over prolongation sequences up to `depth`,
/// branching over which raw control to prolong plus the finite feedback
/// family; returns the first sequence whose leaf is static feedback
/// linearizable. Exhaustion returns `None`.
///
/// Feedback-family entries only apply at nodes whose state dimension
/// matches the entry's arity.
pub fn brute_force_lsop(
    sys: &ControlAffineSystem,
    depth: usize,
    feedback_family: &[(RatFun, RatFun)],
    smp: &Sampler,
) -> Result<Option<LsopWitness>> {
    if depth > 4 {
        return Err(Error::Validation(format!(
            "prolongation search depth {} exceeds the supported bound of 4",
            depth
        )));
    }
    let mut queue: Vec<(ControlAffineSystem, Vec<LsopStep>)> = vec![(sys.clone(), Vec::new())];
    let mut head = 0;
    while head < queue.len() {
        let (cur, steps) = queue[head].clone();
        head += 1;
        let sfl = is_sfl(&cur, smp)?;
        if sfl.linearizable() {
            return Ok(Some(LsopWitness {
                steps,
                rho: sfl.rho.expect("linearizable result has a filling level"),
                system: cur,
            }));
        }
        if steps.len() == depth {
            continue;
        }
        let idx = steps.len();
        for control in [1, 2] {
            let child = raw_prolong(&cur, control, idx)?;
            let mut s = steps.clone();
            s.push(LsopStep {
                control,
                feedback: None,
            });
            queue.push((child, s));
        }
        for (fi, beta) in feedback_family.iter().enumerate() {
            if beta.0.arity() != cur.dim() {
                continue;
            }
            let child = feedback_prolong(&cur, beta, idx)?;
            let mut s = steps.clone();
            s.push(LsopStep {
                control: 1,
                feedback: Some(fi),
            });
            queue.push((child, s));
        }
    }
    Ok(None)
}

/// Discretized sweep over the projective line of constant candidate
/// columns `(c1 : c2)`: for each ratio, the span of the level below `k`
/// and `c1 ad_f^k g1 + c2 ad_f^k g2` is tested pointwise for the
/// corank-one involutivity obstruction at every supplied point. Survivors
/// are returned in sweep order: `(t, 1)` for `t = -radius..=radius`, then
/// the point at infinity `(1, 0)`.
///
/// An empty result corroborates (but does not prove) that no corank-one
/// involutive subdistribution exists; a single survivor corroborates
/// uniqueness.
pub fn h_candidate_search(
    sys: &ControlAffineSystem,
    points: &[Vec<BigRational>],
    radius: i64,
    smp: &Sampler,
) -> Result<Vec<(i64, i64)>> {
    if points.len() < 3 {
        return Err(Error::Validation(
            "candidate sweep needs at least three sample points".into(),
        ));
    }
    let filt = linearizability_sequence(sys, smp, None)?;
    let k = non_involutivity_index(&filt, smp)?.ok_or_else(|| {
        Error::Validation("every level is involutive: nothing to sweep".into())
    })?;
    let lower: Vec<VectorField> = if k == 0 {
        Vec::new()
    } else {
        filt.level(k - 1).gens().to_vec()
    };
    let a1 = ad(sys.f(), sys.g1(), k);
    let a2 = ad(sys.f(), sys.g2(), k);
    // Symbolic brackets, evaluated once per point.
    let br_lower_a1: Vec<VectorField> = lower.iter().map(|v| lie_bracket(v, &a1)).collect();
    let br_lower_a2: Vec<VectorField> = lower.iter().map(|v| lie_bracket(v, &a2)).collect();
    let mut br_lower_pairs: Vec<VectorField> = Vec::new();
    for i in 0..lower.len() {
        for j in (i + 1)..lower.len() {
            br_lower_pairs.push(lie_bracket(&lower[i], &lower[j]));
        }
    }

    struct PointData {
        lower_at: Vec<Vec<BigRational>>,
        a1_at: Vec<BigRational>,
        a2_at: Vec<BigRational>,
        b1_at: Vec<Vec<BigRational>>,
        b2_at: Vec<Vec<BigRational>>,
        pairs_at: Vec<Vec<BigRational>>,
    }
    let mut data = Vec::with_capacity(points.len());
    for p in points {
        data.push(PointData {
            lower_at: lower.iter().map(|v| eval_field(v, p)).collect::<Result<_>>()?,
            a1_at: eval_field(&a1, p)?,
            a2_at: eval_field(&a2, p)?,
            b1_at: br_lower_a1
                .iter()
                .map(|v| eval_field(v, p))
                .collect::<Result<_>>()?,
            b2_at: br_lower_a2
                .iter()
                .map(|v| eval_field(v, p))
                .collect::<Result<_>>()?,
            pairs_at: br_lower_pairs
                .iter()
                .map(|v| eval_field(v, p))
                .collect::<Result<_>>()?,
        });
    }

    let combine = |x: &[BigRational], y: &[BigRational], c1: i64, c2: i64| -> Vec<BigRational> {
        let c1 = BigRational::from_integer(BigInt::from(c1));
        let c2 = BigRational::from_integer(BigInt::from(c2));
        x.iter()
            .zip(y)
            .map(|(a, b)| a * &c1 + b * &c2)
            .collect()
    };

    let mut ratios: Vec<(i64, i64)> = (-radius..=radius).map(|t| (t, 1)).collect();
    ratios.push((1, 0));

    let mut survivors = Vec::new();
    'ratio: for (c1, c2) in ratios {
        if c1 == 0 && c2 == 0 {
            continue;
        }
        for d in &data {
            let w = combine(&d.a1_at, &d.a2_at, c1, c2);
            // The candidate must genuinely extend the lower level at p.
            if in_span(&d.lower_at, &w) {
                continue 'ratio;
            }
            let mut h_cols = d.lower_at.clone();
            h_cols.push(w);
            for (i, _) in lower.iter().enumerate() {
                let br = combine(&d.b1_at[i], &d.b2_at[i], c1, c2);
                if !in_span(&h_cols, &br) {
                    continue 'ratio;
                }
            }
            for br in &d.pairs_at {
                if !in_span(&h_cols, br) {
                    continue 'ratio;
                }
            }
        }
        survivors.push((c1, c2));
    }
    Ok(survivors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{characteristic_distribution, derived_step};
    use crate::symcore::{parse_expr, Expr, Vars};

    fn smp() -> Sampler {
        Sampler::default()
    }

    fn field(vars: &Vars, comps: &[&str]) -> VectorField {
        let exprs: Vec<Expr> = comps
            .iter()
            .map(|s| parse_expr(s, vars).unwrap())
            .collect();
        VectorField::from_exprs(vars.clone(), &exprs).unwrap()
    }

    fn sys(name: &str, names: &[&str], f: &[&str], g1: &[&str], g2: &[&str]) -> ControlAffineSystem {
        let v = Vars::from_strs(names);
        ControlAffineSystem::new(name, v.clone(), field(&v, f), field(&v, g1), field(&v, g2))
            .unwrap()
    }

    fn chained() -> ControlAffineSystem {
        sys(
            "chained",
            &["x1", "x2", "x3", "x4"],
            &["0", "0", "0", "0"],
            &["1", "x3", "x4", "0"],
            &["0", "0", "0", "1"],
        )
    }

    #[test]
    fn pointwise_characteristic_of_involutive_distribution_is_itself() {
        let v = Vars::from_strs(&["x1", "x2", "x3"]);
        let d = Distribution::new(
            v.clone(),
            vec![field(&v, &["1", "0", "x1"]), field(&v, &["0", "1", "0"])],
        );
        assert!(crate::geometry::is_involutive(&d, &smp()).unwrap());
        for p in sample_points(3, 3, 7) {
            let basis = pointwise_characteristic(&d, &p).unwrap();
            assert_eq!(basis.len(), 2);
            let d_at: Vec<Vec<BigRational>> = d
                .gens()
                .iter()
                .map(|g| eval_field(g, &p).unwrap())
                .collect();
            for b in &basis {
                assert!(in_span(&d_at, b));
            }
        }
    }

    #[test]
    fn pointwise_characteristic_of_chained_derived_step_is_the_last_axis() {
        let s = chained();
        let d0 = Distribution::new(
            s.vars().clone(),
            vec![s.g1().clone(), s.g2().clone()],
        );
        let e1 = derived_step(&d0, &smp()).unwrap();
        for p in sample_points(4, 3, 11) {
            let basis = pointwise_characteristic(&e1, &p).unwrap();
            assert_eq!(basis.len(), 1);
            let axis = vec![
                BigRational::zero(),
                BigRational::zero(),
                BigRational::zero(),
                BigRational::one(),
            ];
            assert!(in_span(&basis, &axis));
        }
    }

    #[test]
    fn pointwise_characteristic_matches_symbolic_on_random_fixture() {
        let v = Vars::from_strs(&["x1", "x2", "x3", "x4"]);
        let d = Distribution::new(
            v.clone(),
            vec![
                field(&v, &["1", "0", "x2", "0"]),
                field(&v, &["0", "1", "x1", "0"]),
                field(&v, &["0", "0", "0", "1"]),
            ],
        );
        let c = characteristic_distribution(&d, &smp()).unwrap();
        let c_rank = c.rank(&smp()).unwrap();
        for p in sample_points(4, 3, 13) {
            let basis = pointwise_characteristic(&d, &p).unwrap();
            assert_eq!(basis.len(), c_rank);
            for g in c.gens() {
                let g_at = eval_field(g, &p).unwrap();
                assert!(in_span(&basis, &g_at));
            }
        }
    }

    #[test]
    fn brute_force_finds_sfl_immediately_for_brunovsky() {
        let s = sys(
            "brunovsky",
            &["x1", "x2", "x3", "x4"],
            &["x3", "x4", "0", "0"],
            &["0", "0", "1", "0"],
            &["0", "0", "0", "1"],
        );
        let w = brute_force_lsop(&s, 0, &[], &smp()).unwrap().unwrap();
        assert!(w.steps.is_empty());
        assert_eq!(w.rho, 1);
    }

    #[test]
    fn brute_force_linearizes_chained_form_in_two_steps() {
        let s = chained();
        let w = brute_force_lsop(&s, 2, &[], &smp()).unwrap().unwrap();
        assert_eq!(w.steps.len(), 2);
        assert!(w.steps.iter().all(|st| st.control == 1 && st.feedback.is_none()));
        assert_eq!(w.system.dim(), 6);
    }

    #[test]
    fn candidate_sweep_isolates_the_unique_pattern_b_ratio() {
        let s = sys(
            "pattern-b",
            &["x1", "x2", "x3", "x4", "x5"],
            &["-x4", "-x5", "-x5^2/2", "0", "0"],
            &["0", "0", "0", "0", "1"],
            &["0", "0", "0", "1", "0"],
        );
        let pts = sample_points(5, 3, 3);
        let survivors = h_candidate_search(&s, &pts, 100, &smp()).unwrap();
        assert_eq!(survivors, vec![(0, 1)]);
    }
}
