//! Decision engine: classify the first non-involutive level of the
//! linearizability filtration, construct the corank-one involutive
//! subdistribution `H^k` wherever one is prescribed, extract the feedback
//! column and the to-be-prolonged control, build the prolonged system, and
//! iterate to a final verdict.
//!
//! Case vocabulary used throughout (also in reports):
//! * `I` — every filtration level is involutive (no `k`).
//! * `II_A` / `II_B` / `II_NO_H` — a bracket of a lower level with level `k`
//!   leaves level `k`; the sublabel is decided by the number `r` of new
//!   directions gained by one derived step (`2` / `1` / anything else).
//! * `III_C1` … `III_C6` — all lower brackets stay inside; subcases are
//!   decided by the derived-flag growth of level `k`, its involutive
//!   closure, and the drift's action on that closure.

use std::fmt;

use crate::error::{Error, Result};
use crate::funlinalg::{clear_denominators, solve_membership, FunMatrix, Sampler};
use crate::geometry::{
    ad, characteristic_distribution, derived_step, involutive_closure, is_involutive,
    lie_bracket, linearizability_sequence, non_involutivity_index, ControlAffineSystem,
    Distribution, Filtration, VectorField,
};
use crate::symcore::{Expr, Poly, RatFun, Vars};

/// Case label attached to one analysis step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseLabel {
    /// All filtration levels involutive.
    I,
    /// Case II with `r = 2` (pattern A).
    IiA,
    /// Case II with `r = 1` (pattern B).
    IiB,
    /// Case II with `r > 2`: no corank-one involutive subdistribution can
    /// exist (`r <= 2` is necessary).
    IiNoH,
    /// Case III, closure of level `k` is the whole tangent space.
    IiiC1,
    /// Case III, derived growth `(2k+2, 2k+3, 2k+4, ...)`.
    IiiC2,
    /// Case III, derived growth `(2k+2, 2k+3, 2k+5, ...)`.
    IiiC3,
    /// Case III, proper drift-invariant closure (not strongly accessible).
    IiiC4,
    /// Case III, one new drift direction, `rk D^{k+1} = 2k+3`.
    IiiC5Prime,
    /// Case III, one new drift direction, `rk D^{k+1} = 2k+4`.
    IiiC5DoublePrime,
    /// Case III, two new drift directions.
    IiiC6,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::I => "I",
            CaseLabel::IiA => "II_A",
            CaseLabel::IiB => "II_B",
            CaseLabel::IiNoH => "II_NO_H",
            CaseLabel::IiiC1 => "III_C1",
            CaseLabel::IiiC2 => "III_C2",
            CaseLabel::IiiC3 => "III_C3",
            CaseLabel::IiiC4 => "III_C4",
            CaseLabel::IiiC5Prime => "III_C5_PRIME",
            CaseLabel::IiiC5DoublePrime => "III_C5_DOUBLE_PRIME",
            CaseLabel::IiiC6 => "III_C6",
        }
    }

    pub fn is_case_ii(self) -> bool {
        matches!(self, CaseLabel::IiA | CaseLabel::IiB | CaseLabel::IiNoH)
    }

    pub fn is_case_iii(self) -> bool {
        matches!(
            self,
            CaseLabel::IiiC1
                | CaseLabel::IiiC2
                | CaseLabel::IiiC3
                | CaseLabel::IiiC4
                | CaseLabel::IiiC5Prime
                | CaseLabel::IiiC5DoublePrime
                | CaseLabel::IiiC6
        )
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classification data for the first non-involutive level.
#[derive(Clone, Debug)]
pub struct CaseInfo {
    pub label: CaseLabel,
    pub k: usize,
    /// Corank of level `k` in its first derived step.
    pub r: usize,
    /// Corank of level `k` in level `k` plus its brackets with level `k-1`
    /// (Case II only).
    pub r_ii: Option<usize>,
    /// Ranks of the derived flag of level `k`, as far as they were needed.
    pub growth: Vec<usize>,
    /// Rank of the involutive closure of level `k` (Case III only).
    pub closure_rank: Option<usize>,
    /// Rank of `closure + span{ad_f^{k+1} g_i}` in the C4/C5/C6 split.
    pub drift_extension_rank: Option<usize>,
    /// Rank of level `k+1` in the C5 split.
    pub next_level_rank: Option<usize>,
}

/// Brackets of all generator pairs between two lists, cleared, zeros dropped.
fn pair_brackets(a: &[VectorField], b: &[VectorField]) -> Vec<VectorField> {
    let mut out = Vec::new();
    for v in a {
        for w in b {
            let br = lie_bracket(v, w).cleared();
            if !br.is_zero() {
                out.push(br);
            }
        }
    }
    out
}

/// The level below `j` in the filtration; level `-1` is the zero distribution.
fn lower_level(vars: &Vars, filt: &Filtration, j: usize) -> Distribution {
    if j == 0 {
        Distribution::new(vars.clone(), Vec::new())
    } else {
        filt.level(j - 1).clone()
    }
}

/// Decide the case of the first non-involutive level `k`.
///
/// Case II holds when some bracket of level `k-1` with level `k` leaves
/// level `k` (possible only for `k >= 1`); the sublabel is decided by `r`.
/// Otherwise Case III holds and the subcases C1–C6 are decided by the
/// derived flag of level `k`, its involutive closure, and the rank of the
/// closure extended by `ad_f^{k+1} g_1, ad_f^{k+1} g_2`.
pub fn classify(
    sys: &ControlAffineSystem,
    filt: &mut Filtration,
    k: usize,
    smp: &Sampler,
) -> Result<CaseInfo> {
    let n = sys.dim();
    let d_k = filt.level(k).clone();
    let rk_dk = d_k.rank(smp)?;
    let e1 = derived_step(&d_k, smp)?;
    let rk_e1 = e1.rank(smp)?;
    let r = rk_e1 - rk_dk;

    if k >= 1 {
        let d_km1 = filt.level(k - 1).clone();
        let mixed = d_k.with_appended(&pair_brackets(d_km1.gens(), d_k.gens()));
        let rk_mixed = mixed.rank(smp)?;
        if rk_mixed > rk_dk {
            let label = match r {
                1 => CaseLabel::IiB,
                2 => CaseLabel::IiA,
                _ => CaseLabel::IiNoH,
            };
            return Ok(CaseInfo {
                label,
                k,
                r,
                r_ii: Some(rk_mixed - rk_dk),
                growth: vec![rk_dk, rk_e1],
                closure_rank: None,
                drift_extension_rank: None,
                next_level_rank: None,
            });
        }
    }

    // Case III: brackets with lower levels stay inside, so the only new
    // direction of the derived step is the bracket of the two top
    // generators — exactly one rank must be gained.
    if r != 1 {
        return Err(Error::Internal(format!(
            "case analysis violated: level {} gains {} directions in one derived step \
             although all lower brackets stay inside",
            k, r
        )));
    }
    let mut growth = vec![rk_dk, rk_e1];
    if rk_e1 == n {
        return Ok(CaseInfo {
            label: CaseLabel::IiiC1,
            k,
            r,
            r_ii: None,
            growth,
            closure_rank: Some(n),
            drift_extension_rank: None,
            next_level_rank: None,
        });
    }
    let e2 = derived_step(&e1, smp)?;
    let rk_e2 = e2.rank(smp)?;
    if rk_e2 > rk_e1 {
        growth.push(rk_e2);
        let closure = involutive_closure(&e2, smp)?;
        let closure_rank = Some(closure.rank(smp)?);
        let label = match rk_e2 - rk_e1 {
            1 => CaseLabel::IiiC2,
            2 => CaseLabel::IiiC3,
            d => {
                return Err(Error::Internal(format!(
                    "case analysis violated: second derived step gains {} directions",
                    d
                )))
            }
        };
        return Ok(CaseInfo {
            label,
            k,
            r,
            r_ii: None,
            growth,
            closure_rank,
            drift_extension_rank: None,
            next_level_rank: None,
        });
    }

    // The first derived step is already involutive: it is the closure, a
    // proper subbundle. Split by how far the drift pushes out of it.
    filt.ensure_ads(sys, k + 1);
    let next_pair = [filt.ad_gen(k + 1, 0).clone(), filt.ad_gen(k + 1, 1).clone()];
    let rk_dk1 = d_k.with_appended(&next_pair).rank(smp)?;
    let rho_star = e1.with_appended(&next_pair).rank(smp)?;
    let label = match rho_star - rk_e1 {
        0 => CaseLabel::IiiC4,
        1 => match rk_dk1 - rk_dk {
            1 => CaseLabel::IiiC5Prime,
            2 => CaseLabel::IiiC5DoublePrime,
            d => {
                return Err(Error::Internal(format!(
                    "case analysis violated: level {} gains {} drift directions while \
                     its closure gains one",
                    k + 1,
                    d
                )))
            }
        },
        2 => CaseLabel::IiiC6,
        d => {
            return Err(Error::Internal(format!(
                "case analysis violated: closure extended by two drift directions \
                 gains rank {}",
                d
            )))
        }
    };
    Ok(CaseInfo {
        label,
        k,
        r,
        r_ii: None,
        growth,
        closure_rank: Some(rk_e1),
        drift_extension_rank: Some(rho_star),
        next_level_rank: Some(rk_dk1),
    })
}

/// Necessary-condition screen for flatness, run after classification.
///
/// Returns a rejection reason when either the rank jump into level `k` is
/// one instead of two (corank deficiency), or the system is classified C4,
/// whose proper drift-invariant closure certifies that the system is not
/// strongly accessible. `None` means no obstruction found here.
pub fn flatness_necessary_check(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    info: &CaseInfo,
    smp: &Sampler,
) -> Result<Option<String>> {
    let k = info.k;
    if k >= 1 {
        let jump = filt.ranks()[k] - filt.ranks()[k - 1];
        if jump == 1 {
            return Ok(Some(format!(
                "corank deficiency: level {} adds only one direction to level {}",
                k,
                k - 1
            )));
        }
    }
    if info.label == CaseLabel::IiiC4 {
        // Cross-check the classification: the involutive closure must be a
        // proper subbundle left invariant by the drift.
        let closure = involutive_closure(filt.level(k), smp)?;
        let rk = closure.rank(smp)?;
        if rk >= sys.dim() {
            return Err(Error::Internal(
                "C4 classification with full-rank closure".into(),
            ));
        }
        let mut pushed = vec![lie_bracket(sys.f(), &closure.gens()[0])];
        for g in &closure.gens()[1..] {
            pushed.push(lie_bracket(sys.f(), g));
        }
        let pushed: Vec<VectorField> = pushed.into_iter().map(|v| v.cleared()).collect();
        if closure.with_appended(&pushed).rank(smp)? != rk {
            return Err(Error::Internal(
                "C4 classification contradicted: drift leaves the closure".into(),
            ));
        }
        return Ok(Some(format!(
            "not strongly accessible: the involutive closure of level {} is a proper \
             drift-invariant distribution of rank {}",
            k, rk
        )));
    }
    Ok(None)
}

/// How the corank-one involutive subdistribution was singled out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uniqueness {
    /// The case forces this distribution (Case II, C2).
    Unique,
    /// Free choice resolved by the deterministic candidate family (C1 or
    /// the C5 fallback).
    ChosenCanonically,
    /// The special C5 choice: the unique candidate gaining an extra
    /// involutive level after prolongation.
    SpecialC5,
}

/// A verified corank-one involutive subdistribution of the first
/// non-involutive level, together with its feedback data.
#[derive(Clone, Debug)]
pub struct LsopiDistribution {
    pub h: Distribution,
    /// Feedback-column pair `(beta21, beta22)`, normalized to a primitive
    /// polynomial pair; `H = D^{k-1} + span{ad_f^k (beta21 g1 + beta22 g2)}`.
    pub beta: (RatFun, RatFun),
    /// The kept (not prolonged) input direction `beta21*g1 + beta22*g2`.
    pub tilde_g2: VectorField,
    /// Completing feedback column: `true` means `(1, 0)` (so the prolonged
    /// direction is `g1`), `false` means `(0, 1)`.
    pub first_column_e1: bool,
    pub uniqueness: Uniqueness,
}

/// Quick validity test for a candidate sandwich distribution: correct rank,
/// inclusion of the lower level, containment in level `k`, involutivity.
fn is_valid_sandwich(
    h: &Distribution,
    d_km1: &Distribution,
    d_k: &Distribution,
    k: usize,
    smp: &Sampler,
) -> Result<bool> {
    if h.rank(smp)? != 2 * k + 1 {
        return Ok(false);
    }
    for g in d_km1.gens() {
        if !h.contains(g, smp)? {
            return Ok(false);
        }
    }
    for g in h.gens() {
        if !d_k.contains(g, smp)? {
            return Ok(false);
        }
    }
    is_involutive(h, smp)
}

/// Solve for the feedback column of a verified sandwich distribution:
/// the combination `beta21 ad_f^k g1 + beta22 ad_f^k g2` lying in `H`.
///
/// Because corrections from rescaled filtration generators live in the
/// lower level (contained in `H`), this is an exact linear membership
/// problem; the stored per-generator scales convert the solution back to
/// the true column, which is then normalized to a primitive pair.
fn extract_beta_from(filt: &Filtration, k: usize, h: &Distribution, smp: &Sampler) -> Result<(RatFun, RatFun)> {
    let a1 = filt.ad_gen(k, 0);
    let a2 = filt.ad_gen(k, 1);
    let s1 = filt.ad_scale(k, 0);
    let s2 = filt.ad_scale(k, 1);
    let hm = h.matrix();
    let (b1, b2) = if solve_membership(a1.comps(), &hm, smp)?.is_some() {
        if solve_membership(a2.comps(), &hm, smp)?.is_some() {
            return Err(Error::Internal(
                "candidate subdistribution contains the whole level".into(),
            ));
        }
        (s1.clone(), RatFun::zero(s1.arity()))
    } else {
        let a1col = FunMatrix::from_columns(a1.comps().len(), s1.arity(), &[a1.comps().to_vec()])?;
        let ext = hm.hstack(&a1col)?;
        match solve_membership(a2.comps(), &ext, smp)? {
            Some(sol) => {
                let lambda = sol.last().expect("augmented system has a column").clone();
                // a2 = lambda*a1 mod H, so (-lambda)*a1 + a2 lies in H;
                // undo the per-generator scales.
                (lambda.neg().mul(s1), s2.clone())
            }
            None => {
                return Err(Error::Internal(
                    "level generators do not reduce to a single direction modulo the \
                     candidate subdistribution"
                        .into(),
                ))
            }
        }
    };
    let pair = clear_denominators(&[b1, b2]);
    Ok((pair[0].clone(), pair[1].clone()))
}

/// Feedback column of a given corank-one involutive subdistribution of the
/// first non-involutive level. Standalone entry point: recomputes the
/// filtration and `k` for `sys`.
pub fn extract_beta_column(
    sys: &ControlAffineSystem,
    h: &Distribution,
    smp: &Sampler,
) -> Result<(RatFun, RatFun)> {
    let filt = linearizability_sequence(sys, smp, None)?;
    let k = non_involutivity_index(&filt, smp)?.ok_or_else(|| {
        Error::Validation("every filtration level is involutive: no level to split".into())
    })?;
    extract_beta_from(&filt, k, h, smp)
}

/// Promote a pre-validated sandwich distribution to a full
/// [`LsopiDistribution`]: verify the corank-one sandwich, extract the
/// feedback column, rebuild the span from it, and check the whole family
/// of lower-level companions for involutivity.
fn finish_h(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    k: usize,
    h: Distribution,
    uniqueness: Uniqueness,
    smp: &Sampler,
) -> Result<LsopiDistribution> {
    let d_km1 = lower_level(sys.vars(), filt, k);
    let d_k = filt.level(k);
    if !is_valid_sandwich(&h, &d_km1, d_k, k, smp)? {
        return Err(Error::Internal(
            "constructed subdistribution fails the corank-one sandwich verification".into(),
        ));
    }
    let (b1, b2) = extract_beta_from(filt, k, &h, smp)?;
    let tilde_g2 = sys.g1().scale(&b1).add(&sys.g2().scale(&b2));
    if tilde_g2.is_zero() {
        return Err(Error::Internal("feedback column is identically zero".into()));
    }
    // The span must be recovered exactly by the true iterated bracket of
    // the kept direction.
    let adk_t = ad(sys.f(), &tilde_g2, k).cleared();
    let rebuilt = d_km1.with_appended(&[adk_t]);
    if !h.same_span(&rebuilt, smp)? {
        return Err(Error::Internal(
            "feedback column does not regenerate the subdistribution".into(),
        ));
    }
    // Companion family: for every lower level j the span of the level
    // below it and `ad_f^j tilde_g2` must already be involutive.
    for j in 0..k {
        let adj = ad(sys.f(), &tilde_g2, j).cleared();
        let hj = lower_level(sys.vars(), filt, j).with_appended(&[adj]);
        if !is_involutive(&hj, smp)? {
            return Err(Error::Internal(format!(
                "companion span at level {} is not involutive",
                j
            )));
        }
    }
    let first_column_e1 = !b2.is_zero();
    Ok(LsopiDistribution {
        h,
        beta: (b1, b2),
        tilde_g2,
        first_column_e1,
        uniqueness,
    })
}

/// Outcome of a Case II construction attempt.
#[derive(Clone, Debug)]
pub struct CaseIiOutcome {
    pub dist: Option<LsopiDistribution>,
    /// Name of the first failed condition when no distribution exists.
    pub failed_condition: Option<String>,
    /// Rank of the characteristic distribution of level `k`.
    pub characteristic_rank: Option<usize>,
}

/// Case II construction. The conditions checked here are necessary and
/// sufficient, so a failed condition certifies that no corank-one
/// involutive subdistribution exists at all.
///
/// Pattern A (`r = 2`): requires the mixed-bracket corank to be one, the
/// characteristic distribution `C` of level `k` to have rank `2k-1`, and
/// the span of level `k-1` with `[f, C]` to have rank `2k+1` and be
/// involutive — that span is the unique candidate.
///
/// Pattern B (`r = 1`): requires `rk C = 2k` and the span of level `k-1`
/// with `C` to have rank `2k+1` and be involutive — again unique.
pub fn construct_h_case_ii(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    info: &CaseInfo,
    smp: &Sampler,
) -> Result<CaseIiOutcome> {
    let k = info.k;
    let d_k = filt.level(k);
    let d_km1 = lower_level(sys.vars(), filt, k);
    let fail = |name: &str, c_rank: Option<usize>| {
        Ok(CaseIiOutcome {
            dist: None,
            failed_condition: Some(name.to_string()),
            characteristic_rank: c_rank,
        })
    };
    match info.label {
        CaseLabel::IiA => {
            if info.r_ii != Some(1) {
                return fail("mixed-bracket corank is not one", None);
            }
            let c = characteristic_distribution(d_k, smp)?;
            let c_rank = c.rank(smp)?;
            if c_rank != 2 * k - 1 {
                return fail("characteristic rank differs from 2k-1", Some(c_rank));
            }
            // Under the pattern-A conditions the characteristic
            // distribution sits inside the lower level, which makes the
            // generator-level drift brackets span the right object.
            for g in c.gens() {
                if !d_km1.contains(g, smp)? {
                    return Err(Error::Internal(
                        "characteristic distribution leaves the lower level in pattern A"
                            .into(),
                    ));
                }
            }
            let pushed: Vec<VectorField> = c
                .gens()
                .iter()
                .map(|g| lie_bracket(sys.f(), g).cleared())
                .collect();
            let h = d_km1.with_appended(&pushed);
            if h.rank(smp)? != 2 * k + 1 {
                return fail("drift extension of the characteristic space has wrong rank", Some(c_rank));
            }
            if !is_involutive(&h, smp)? {
                return fail("drift extension of the characteristic space is not involutive", Some(c_rank));
            }
            let dist = finish_h(sys, filt, k, h, Uniqueness::Unique, smp)?;
            Ok(CaseIiOutcome {
                dist: Some(dist),
                failed_condition: None,
                characteristic_rank: Some(c_rank),
            })
        }
        CaseLabel::IiB => {
            let c = characteristic_distribution(d_k, smp)?;
            let c_rank = c.rank(smp)?;
            if c_rank != 2 * k {
                return fail("characteristic rank differs from 2k", Some(c_rank));
            }
            let h = d_km1.with_appended(c.gens());
            if h.rank(smp)? != 2 * k + 1 {
                return fail("characteristic extension has wrong rank", Some(c_rank));
            }
            if !is_involutive(&h, smp)? {
                return fail("characteristic extension is not involutive", Some(c_rank));
            }
            let dist = finish_h(sys, filt, k, h, Uniqueness::Unique, smp)?;
            Ok(CaseIiOutcome {
                dist: Some(dist),
                failed_condition: None,
                characteristic_rank: Some(c_rank),
            })
        }
        _ => Err(Error::Internal(
            "pattern construction called outside Case II A/B".into(),
        )),
    }
}

/// Deterministic candidate feedback columns `(c1, c2)` for the free-choice
/// constructions, in trial order: the two constant columns, then exact
/// common-factor solutions of the constant-column involutivity
/// obstruction, then a small integer-ratio grid.
fn candidate_columns(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    k: usize,
    smp: &Sampler,
) -> Result<Vec<(RatFun, RatFun)>> {
    let n = sys.dim();
    let one = RatFun::one(n);
    let zero = RatFun::zero(n);
    let mut out: Vec<(RatFun, RatFun)> = vec![(one.clone(), zero.clone()), (zero.clone(), one.clone())];
    out.extend(obstruction_solutions(sys, filt, k, smp)?);
    for t in [1i64, -1, 2, -2, 3, -3] {
        out.push((one.clone(), RatFun::from_int(n, t)));
    }
    // Drop duplicates while preserving order (compare canonical pairs).
    let mut seen: Vec<(RatFun, RatFun)> = Vec::new();
    out.retain(|c| {
        if seen.iter().any(|s| s == c) {
            false
        } else {
            seen.push(c.clone());
            true
        }
    });
    Ok(out)
}

/// Exact solutions of the involutivity obstruction for spans
/// `D^{k-1} + span{c1 a1 + c2 a2}` with constant column `(c1, c2)`.
///
/// For each lower-level generator `v`, writing `[v, a_i] = A_i a1 + B_i a2`
/// modulo the lower level, membership of `[v, w]` in the candidate span
/// forces the quadratic `-B1 c1^2 + (A1 - B2) c1 c2 + A2 c2^2 = 0`. A
/// common linear factor of all these quadratics (in `s = c1/c2`) yields a
/// function-valued candidate column.
fn obstruction_solutions(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    k: usize,
    smp: &Sampler,
) -> Result<Vec<(RatFun, RatFun)>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let n = sys.dim();
    let d_km1 = filt.level(k - 1);
    let a1 = filt.ad_gen(k, 0);
    let a2 = filt.ad_gen(k, 1);
    let mut base_cols: Vec<Vec<RatFun>> = d_km1.gens().iter().map(|g| g.comps().to_vec()).collect();
    base_cols.push(a1.comps().to_vec());
    base_cols.push(a2.comps().to_vec());
    let m = FunMatrix::from_columns(n, n, &base_cols)?;
    let mut quadratics: Vec<Poly> = Vec::new();
    for v in d_km1.gens() {
        let mut coeffs = Vec::with_capacity(2);
        for a in [a1, a2] {
            let br = lie_bracket(v, a);
            match solve_membership(br.comps(), &m, smp)? {
                Some(sol) => {
                    let b = sol[sol.len() - 1].clone();
                    let a_coef = sol[sol.len() - 2].clone();
                    coeffs.push((a_coef, b));
                }
                // A bracket escaping the level contradicts Case III; the
                // caller only uses this family in Case III-like contexts,
                // but the fallback may probe odd configurations — give up
                // on function candidates instead of failing.
                None => return Ok(Vec::new()),
            }
        }
        let (a1c, b1c) = coeffs[0].clone();
        let (a2c, b2c) = coeffs[1].clone();
        // -B1 s^2 + (A1 - B2) s + A2 as a polynomial in the extra variable
        // s, after clearing the three rational coefficients to a common
        // denominator.
        let q2 = b1c.neg();
        let q1 = a1c.sub(&b2c);
        let q0 = a2c;
        let c2 = q2.num().mul(&q1.den().mul(q0.den()));
        let c1 = q1.num().mul(&q2.den().mul(q0.den()));
        let c0 = q0.num().mul(&q2.den().mul(q1.den()));
        let mut q = Poly::zero(n + 1);
        let s = Poly::var(n + 1, n);
        q = q.add(&c2.extended(n + 1).mul(&s.mul(&s)));
        q = q.add(&c1.extended(n + 1).mul(&s));
        q = q.add(&c0.extended(n + 1));
        if !q.is_zero() {
            quadratics.push(q.primitive_part());
        }
    }
    if quadratics.is_empty() {
        return Ok(Vec::new());
    }
    let mut g = quadratics[0].clone();
    for q in &quadratics[1..] {
        g = g.gcd(q);
        if g.is_constant() {
            return Ok(Vec::new());
        }
    }
    let mut out = Vec::new();
    if let Some(pair) = linear_in_s_to_column(&g, n) {
        out.push(pair);
    } else if g.degree_in(n) == 2 {
        // A double root shows up as a linear gcd with the s-derivative.
        let dg = g.derivative(n);
        let lin = g.gcd(&dg);
        if let Some(pair) = linear_in_s_to_column(&lin, n) {
            out.push(pair);
        }
    }
    Ok(out)
}

/// Interpret a polynomial of degree one in the trailing variable `s` as a
/// column `(c1, c2)`: from `P*s + Q = 0` take `s = -Q/P`, i.e. the
/// projective pair `(-Q, P)`. The coefficients `P`, `Q` live in the
/// original `n` variables.
fn linear_in_s_to_column(g: &Poly, n: usize) -> Option<(RatFun, RatFun)> {
    if g.degree_in(n) != 1 {
        return None;
    }
    // Split g = P*s + Q by the exponent of the trailing variable.
    let mut p = Poly::zero(n);
    let mut q = Poly::zero(n);
    for (m, c) in g.terms() {
        let restricted = crate::symcore::Monomial(m.0[..n].to_vec());
        let t = Poly::one(n).mul_term(&restricted, c);
        if m.0[n] == 1 {
            p = p.add(&t);
        } else {
            q = q.add(&t);
        }
    }
    if p.is_zero() {
        return None;
    }
    let c1 = RatFun::from_poly(q.neg());
    let c2 = RatFun::from_poly(p);
    let cleared = clear_denominators(&[c1, c2]);
    Some((cleared[0].clone(), cleared[1].clone()))
}

/// Try the deterministic candidate family and return the first combination
/// that spans a valid corank-one involutive subdistribution.
fn choose_canonical_h(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    k: usize,
    smp: &Sampler,
) -> Result<Option<Distribution>> {
    let d_km1 = lower_level(sys.vars(), filt, k);
    let d_k = filt.level(k);
    let a1 = filt.ad_gen(k, 0);
    let a2 = filt.ad_gen(k, 1);
    for (c1, c2) in candidate_columns(sys, filt, k, smp)? {
        let w = a1.scale(&c1).add(&a2.scale(&c2)).cleared();
        if w.is_zero() {
            continue;
        }
        let h = d_km1.with_appended(&[w]);
        if is_valid_sandwich(&h, &d_km1, d_k, k, smp)? {
            return Ok(Some(h));
        }
    }
    Ok(None)
}

/// The combination of the two input fields whose `(k+1)`-fold drift bracket
/// falls into the involutive closure of level `k` (condition C5).
///
/// Solves the one-dimensional kernel of the two drift directions modulo the
/// closure; the result is `g2 - alpha*g1`, or `g1` when the first drift
/// direction already lies inside. The returned field is verified by an
/// exact iterated bracket.
pub fn find_tilde_g2(
    sys: &ControlAffineSystem,
    filt: &mut Filtration,
    k: usize,
    smp: &Sampler,
) -> Result<VectorField> {
    let dbar = involutive_closure(filt.level(k), smp)?;
    filt.ensure_ads(sys, k + 1);
    let a1 = filt.ad_gen(k + 1, 0).clone();
    let a2 = filt.ad_gen(k + 1, 1).clone();
    let s1 = filt.ad_scale(k + 1, 0).clone();
    let s2 = filt.ad_scale(k + 1, 1).clone();
    let dbm = dbar.matrix();
    let tilde = if solve_membership(a1.comps(), &dbm, smp)?.is_some() {
        if solve_membership(a2.comps(), &dbm, smp)?.is_some() {
            return Err(Error::Internal(
                "both drift directions fall into the closure (contradicts the case split)"
                    .into(),
            ));
        }
        sys.g1().clone()
    } else {
        let a1col = FunMatrix::from_columns(a1.comps().len(), s1.arity(), &[a1.comps().to_vec()])?;
        let ext = dbm.hstack(&a1col)?;
        let sol = solve_membership(a2.comps(), &ext, smp)?.ok_or_else(|| {
            Error::Internal(
                "no single new drift direction modulo the closure (contradicts the case split)"
                    .into(),
            )
        })?;
        let lambda = sol.last().expect("augmented system has a column").clone();
        // Stored relation a2 = lambda*a1 (mod closure); undoing the scales
        // gives the true coefficient alpha = lambda*s1/s2.
        let alpha = lambda.mul(&s1).div(&s2)?;
        sys.g2().sub(&sys.g1().scale(&alpha))
    };
    if tilde.is_zero() {
        return Err(Error::Internal("kept input direction is identically zero".into()));
    }
    // Exact verification with true iterated brackets.
    let check = ad(sys.f(), &tilde, k + 1);
    if !dbar.contains(&check, smp)? {
        return Err(Error::Internal(
            "kept input direction fails the closure membership it was solved for".into(),
        ));
    }
    Ok(tilde)
}

/// The two special-subcase conditions for C5: the drift pushes the closure
/// out by the maximal two directions, and the candidate span
/// `D^{k-1} + span{ad_f^k tilde_g2}` is involutive (always true at `k = 0`).
pub fn appendix_a_special(
    sys: &ControlAffineSystem,
    filt: &Filtration,
    k: usize,
    tilde_g2: &VectorField,
    smp: &Sampler,
) -> Result<(bool, bool)> {
    let dbar = involutive_closure(filt.level(k), smp)?;
    let rk = dbar.rank(smp)?;
    let pushed: Vec<VectorField> = dbar
        .gens()
        .iter()
        .map(|g| lie_bracket(sys.f(), g).cleared())
        .collect();
    let c5a = dbar.with_appended(&pushed).rank(smp)? == rk + 2;
    let e = lower_level(sys.vars(), filt, k).with_appended(&[ad(sys.f(), tilde_g2, k).cleared()]);
    let c5b = is_involutive(&e, smp)?;
    Ok((c5a, c5b))
}

/// Conclusive-negative test for C5 with a non-involutive candidate span.
///
/// Computes the corank gained by bracketing level `k` into level `k+1`;
/// when it is two, or when it is one and `[ad_f^k tilde_g2, D^{k+1}]` stays
/// inside level `k+1`, the candidate span was the only possibility, so its
/// non-involutivity certifies a negative verdict.
pub fn appendix_b_conclusive(
    sys: &ControlAffineSystem,
    filt: &mut Filtration,
    k: usize,
    tilde_g2: &VectorField,
    smp: &Sampler,
) -> Result<(usize, bool)> {
    filt.ensure_ads(sys, k + 1);
    let next_pair = [filt.ad_gen(k + 1, 0).clone(), filt.ad_gen(k + 1, 1).clone()];
    let d_k = filt.level(k).clone();
    let d_k1 = d_k.with_appended(&next_pair);
    let rk_dk1 = d_k1.rank(smp)?;
    let mixed = d_k1.with_appended(&pair_brackets(d_k.gens(), d_k1.gens()));
    let frak_r = mixed.rank(smp)? - rk_dk1;
    if frak_r > 2 {
        return Err(Error::Internal(format!(
            "bracket corank {} above level {} exceeds the provable bound of two",
            frak_r,
            k + 1
        )));
    }
    let conclusive = if frak_r == 2 {
        true
    } else if frak_r == 1 {
        let adk_t = ad(sys.f(), tilde_g2, k).cleared();
        let mut stays = true;
        for g in d_k1.gens() {
            let br = lie_bracket(&adk_t, g).cleared();
            if !br.is_zero() && !d_k1.contains(&br, smp)? {
                stays = false;
                break;
            }
        }
        stays
    } else {
        false
    };
    Ok((frak_r, conclusive))
}

/// Outcome of the Case III construction dispatch.
#[derive(Clone, Debug)]
pub enum CaseIiiOutcome {
    /// A distribution to prolong with, plus trace notes.
    Found {
        dist: LsopiDistribution,
        notes: Vec<String>,
        /// True when the C5 special choice enables the extra
        /// post-prolongation involutivity assertions.
        special_assertions: bool,
        /// True when the non-forced fallback family was used.
        used_fallback: bool,
    },
    /// No distribution; the negative is certified.
    NoneCertified { reason: String, notes: Vec<String> },
    /// No rational candidate found although one may exist (C5 fallback
    /// exhausted) — the run can only end inconclusively.
    NoneUnresolved { reason: String, notes: Vec<String> },
    /// C1 with no rational candidate found: the verdict is still positive
    /// by the case guarantee, but the certificate trace stops here.
    GuaranteedWithoutWitness { note: String },
}

/// Case III construction dispatch for the labels that can still carry a
/// corank-one involutive subdistribution (C1, C2, C5 with a rank-two jump).
pub fn construct_h_case_iii(
    sys: &ControlAffineSystem,
    filt: &mut Filtration,
    info: &CaseInfo,
    smp: &Sampler,
) -> Result<CaseIiiOutcome> {
    let k = info.k;
    match info.label {
        CaseLabel::IiiC1 => {
            match choose_canonical_h(sys, filt, k, smp)? {
                Some(h) => {
                    let dist = finish_h(sys, filt, k, h, Uniqueness::ChosenCanonically, smp)?;
                    Ok(CaseIiiOutcome::Found {
                        dist,
                        notes: vec![
                            "closure of the split level is the whole tangent space: any \
                             corank-one involutive subdistribution works and the \
                             prolongation is static feedback linearizable"
                                .into(),
                        ],
                        special_assertions: false,
                        used_fallback: false,
                    })
                }
                None => Ok(CaseIiiOutcome::GuaranteedWithoutWitness {
                    note: "no candidate in the rational search family, but this case \
                           guarantees linearizability after one more prolongation; \
                           certificate trace truncated"
                        .into(),
                }),
            }
        }
        CaseLabel::IiiC2 => {
            let e1 = derived_step(filt.level(k), smp)?;
            let c = characteristic_distribution(&e1, smp)?;
            let d_km1 = lower_level(sys.vars(), filt, k);
            if is_valid_sandwich(&c, &d_km1, filt.level(k), k, smp)? {
                let dist = finish_h(sys, filt, k, c, Uniqueness::Unique, smp)?;
                Ok(CaseIiiOutcome::Found {
                    dist,
                    notes: vec![
                        "characteristic distribution of the first derived step is the \
                         forced choice"
                            .into(),
                    ],
                    special_assertions: false,
                    used_fallback: false,
                })
            } else {
                Ok(CaseIiiOutcome::NoneCertified {
                    reason: "the forced choice (characteristic distribution of the first \
                             derived step) is not a valid corank-one involutive \
                             subdistribution"
                        .into(),
                    notes: Vec::new(),
                })
            }
        }
        CaseLabel::IiiC5DoublePrime => {
            let tilde = find_tilde_g2(sys, filt, k, smp)?;
            let (c5a, c5b) = appendix_a_special(sys, filt, k, &tilde, smp)?;
            let mut notes = vec![format!(
                "kept-direction candidate from the drift kernel: ({})",
                tilde.display_components().join(", ")
            )];
            notes.push(format!(
                "special-subcase conditions: maximal drift growth of the closure = {}, \
                 candidate span involutive = {}",
                c5a, c5b
            ));
            if c5b {
                let e = lower_level(sys.vars(), filt, k)
                    .with_appended(&[ad(sys.f(), &tilde, k).cleared()]);
                let dist = finish_h(sys, filt, k, e, Uniqueness::SpecialC5, smp)?;
                Ok(CaseIiiOutcome::Found {
                    dist,
                    notes,
                    special_assertions: c5a,
                    used_fallback: false,
                })
            } else {
                let (frak_r, conclusive) = appendix_b_conclusive(sys, filt, k, &tilde, smp)?;
                notes.push(format!("bracket corank above the next level: {}", frak_r));
                if conclusive {
                    Ok(CaseIiiOutcome::NoneCertified {
                        reason: format!(
                            "the kept-direction span is the only possible choice here \
                             (bracket corank {}) and it is not involutive",
                            frak_r
                        ),
                        notes,
                    })
                } else {
                    notes.push(
                        "conclusive-negative test indecisive: falling back to the \
                         canonical candidate family (non-forced choice)"
                            .into(),
                    );
                    match choose_canonical_h(sys, filt, k, smp)? {
                        Some(h) => {
                            let dist =
                                finish_h(sys, filt, k, h, Uniqueness::ChosenCanonically, smp)?;
                            Ok(CaseIiiOutcome::Found {
                                dist,
                                notes,
                                special_assertions: false,
                                used_fallback: true,
                            })
                        }
                        None => Ok(CaseIiiOutcome::NoneUnresolved {
                            reason: "no rational candidate found for the non-forced choice; \
                                     another (non-rational) choice might still exist"
                                .into(),
                            notes,
                        }),
                    }
                }
            }
        }
        _ => Err(Error::Internal(
            "construction dispatch called for a case without a candidate".into(),
        )),
    }
}

/// Build the one-fold prolongation: the to-be-prolonged control becomes a
/// state feeding the prolonged input direction, the kept direction becomes
/// the second input field. The drift is untouched otherwise (the affine
/// freedom in the feedback is fixed to zero offset and unit scale).
pub fn build_prolongation(
    sys: &ControlAffineSystem,
    dist: &LsopiDistribution,
    step_index: usize,
) -> Result<ControlAffineSystem> {
    let n = sys.dim();
    let mut state_name = format!("u1_{}", step_index);
    while sys.vars().index_of(&state_name).is_some() {
        state_name.push('_');
    }
    let new_vars = sys.vars().with_appended(&state_name);
    let u = RatFun::var(n + 1, n);
    let prolonged_dir = if dist.first_column_e1 { sys.g1() } else { sys.g2() };
    let drift = sys
        .f()
        .lifted(&new_vars)
        .add(&prolonged_dir.lifted(&new_vars).scale(&u));
    let g1_new = VectorField::unit(new_vars.clone(), n);
    let g2_new = dist.tilde_g2.lifted(&new_vars);
    ControlAffineSystem::new(
        format!("{}.p{}", sys.name, step_index + 1),
        new_vars,
        drift,
        g1_new,
        g2_new,
    )
}

/// Convert a general (not control-affine) two-input system into the
/// control-affine form analyzed by the engine: the two controls become
/// states driven by fresh controls entering through unit fields.
pub fn affinize(
    name: impl Into<String>,
    states: &[String],
    controls: &[String; 2],
    rhs: &[Expr],
    smp: &Sampler,
) -> Result<ControlAffineSystem> {
    let n = states.len();
    if rhs.len() != n {
        return Err(Error::Dimension(format!(
            "{} state equations for {} states",
            rhs.len(),
            n
        )));
    }
    let mut all = states.to_vec();
    all.extend(controls.iter().cloned());
    let vars = Vars::new(all);
    let mut comps = Vec::with_capacity(n + 2);
    for e in rhs {
        if !e.vars().same_table(&vars) {
            return Err(Error::Validation(
                "state equations must be parsed over the combined state+control table".into(),
            ));
        }
        comps.push(e.canon()?);
    }
    // The controls must genuinely steer the system: the derivative matrix
    // with respect to the two controls needs generic rank two.
    let mut deriv_cols = Vec::with_capacity(2);
    for j in 0..2 {
        let col: Vec<RatFun> = comps.iter().map(|c| c.derivative(n + j)).collect();
        deriv_cols.push(col);
    }
    let deriv = FunMatrix::from_columns(n, n + 2, &deriv_cols)?;
    let rk = crate::funlinalg::generic_rank(&deriv, smp)?;
    if rk != 2 {
        return Err(Error::Validation(format!(
            "control derivative matrix has generic rank {} instead of 2",
            rk
        )));
    }
    comps.push(RatFun::zero(n + 2));
    comps.push(RatFun::zero(n + 2));
    let f = VectorField::new(vars.clone(), comps)?;
    let g1 = VectorField::unit(vars.clone(), n);
    let g2 = VectorField::unit(vars.clone(), n + 1);
    ControlAffineSystem::new(name, vars, f, g1, g2)
}

/// Final verdict of an analysis run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Linearizable via the constructed sequence of `ell` prolongations.
    Lsopi { ell: usize },
    /// Certified not linearizable this way.
    NotLsopi { failing_step: usize, reason: String },
    /// Certified not flat (stronger than the negative above).
    NotFlat { reason: String },
    /// A non-forced choice occurred and the run later failed: the negative
    /// cannot be certified.
    Inconclusive {
        fallback_steps: Vec<usize>,
        reason: String,
    },
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Lsopi { .. } => "LSOPI",
            Verdict::NotLsopi { .. } => "NOT_LSOPI",
            Verdict::NotFlat { .. } => "NOT_FLAT",
            Verdict::Inconclusive { .. } => "INCONCLUSIVE",
        }
    }

    pub fn ell(&self) -> Option<usize> {
        match self {
            Verdict::Lsopi { ell } => Some(*ell),
            _ => None,
        }
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Verdict::Lsopi { .. } => None,
            Verdict::NotLsopi { reason, .. }
            | Verdict::NotFlat { reason }
            | Verdict::Inconclusive { reason, .. } => Some(reason),
        }
    }
}

/// One row of the certificate trace.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub index: usize,
    pub n: usize,
    pub state_names: Vec<String>,
    pub k: Option<usize>,
    pub case: CaseLabel,
    pub r: Option<usize>,
    pub r_ii: Option<usize>,
    pub growth: Option<Vec<usize>>,
    pub closure_rank: Option<usize>,
    pub filtration_ranks: Vec<usize>,
    /// Generators of the chosen subdistribution, rendered as component
    /// tuples.
    pub h_generators: Option<Vec<String>>,
    pub beta_column: Option<(String, String)>,
    /// The to-be-prolonged control as an expression in this step's
    /// controls `u1, u2`.
    pub prolonged_control: Option<String>,
    pub notes: Vec<String>,
}

impl StepRecord {
    fn new(index: usize, sys: &ControlAffineSystem) -> StepRecord {
        StepRecord {
            index,
            n: sys.dim(),
            state_names: sys.vars().names().to_vec(),
            k: None,
            case: CaseLabel::I,
            r: None,
            r_ii: None,
            growth: None,
            closure_rank: None,
            filtration_ranks: Vec::new(),
            h_generators: None,
            beta_column: None,
            prolonged_control: None,
            notes: Vec::new(),
        }
    }
}

/// Full result of an analysis run: verdict plus the certificate trace.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub system_name: String,
    pub verdict: Verdict,
    pub conclusive: bool,
    pub steps: Vec<StepRecord>,
}

impl RunReport {
    pub fn ell(&self) -> Option<usize> {
        self.verdict.ell()
    }
}

/// Render the to-be-prolonged control `beta22*u1 - beta21*u2` in this
/// step's control names.
fn render_prolonged_control(b21: &RatFun, b22: &RatFun, names: &[String]) -> String {
    let coef = |c: &RatFun| -> String {
        let s = c.to_display(names);
        if s.contains(['+', '-', ' ']) {
            format!("({})", s)
        } else {
            s
        }
    };
    if b21.is_zero() {
        if b22.is_one() {
            "u1".to_string()
        } else {
            format!("{}*u1", coef(b22))
        }
    } else if b22.is_zero() {
        if b21.is_one() {
            "-u2".to_string()
        } else {
            format!("-{}*u2", coef(b21))
        }
    } else if b21.is_one() && b22.is_one() {
        "u1 - u2".to_string()
    } else {
        format!("{}*u1 - {}*u2", coef(b22), coef(b21))
    }
}

/// Extra checks scheduled for the system built by the previous step.
struct PendingAssertions {
    /// The split level of the parent system.
    k: usize,
    /// Expected span of the prolonged filtration at that level.
    expected_level: Distribution,
    /// When set, the special C5 conditions promise one more involutive
    /// level and a rank-two jump after it.
    special: bool,
}

fn verify_prolongation(
    filt: &Filtration,
    new_k: Option<usize>,
    pending: &PendingAssertions,
    smp: &Sampler,
) -> Result<()> {
    let k = pending.k;
    if let Some(nk) = new_k {
        if nk <= k {
            return Err(Error::Internal(format!(
                "prolongation must push the first non-involutive level above {}, got {}",
                k, nk
            )));
        }
    }
    if filt.max_level() < k {
        return Err(Error::Internal(
            "prolonged filtration saturated below the inherited level".into(),
        ));
    }
    for j in 0..=k {
        if filt.ranks()[j] != 2 * j + 2 {
            return Err(Error::Internal(format!(
                "prolonged level {} has rank {} instead of {}",
                j,
                filt.ranks()[j],
                2 * j + 2
            )));
        }
    }
    if !filt.level(k).same_span(&pending.expected_level, smp)? {
        return Err(Error::Internal(
            "prolonged filtration level differs from the lifted subdistribution span".into(),
        ));
    }
    if pending.special {
        if let Some(nk) = new_k {
            if nk <= k + 1 {
                return Err(Error::Internal(
                    "special-subcase promise broken: the next level is not involutive".into(),
                ));
            }
        }
        let r1 = filt
            .ranks()
            .get(k + 1)
            .copied()
            .ok_or_else(|| Error::Internal("special-subcase promise broken: missing level".into()))?;
        let r2 = filt
            .ranks()
            .get(k + 2)
            .copied()
            .ok_or_else(|| Error::Internal("special-subcase promise broken: missing level".into()))?;
        if r2 - r1 != 2 {
            return Err(Error::Internal(format!(
                "special-subcase promise broken: rank jump {} instead of 2",
                r2 - r1
            )));
        }
    }
    Ok(())
}

/// Run the full iterated analysis.
///
/// Each iteration computes the filtration of the current system. Without a
/// non-involutive level the run ends: positively when some level reaches
/// full rank (the system is static feedback linearizable, so the original
/// one is linearizable after the `ell` prolongations performed), negatively
/// (not flat) when the filtration saturates below full rank. Otherwise the
/// level is classified, screened by the flatness necessary conditions, a
/// corank-one involutive subdistribution is constructed when the case
/// permits one, and the system is prolonged.
///
/// Negative endings are downgraded to inconclusive when an earlier step
/// had to take the non-forced fallback choice; not-flat endings stay
/// conclusive because flatness is invariant under prolongation.
pub fn run_lsopi(
    sys: &ControlAffineSystem,
    max_steps: Option<usize>,
    smp: &Sampler,
) -> Result<RunReport> {
    sys.validate_input_rank(smp)?;
    let cap = max_steps.unwrap_or_else(|| sys.dim()).max(1);
    let mut cur = sys.clone();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut fallback_steps: Vec<usize> = Vec::new();
    let mut prev_k: Option<usize> = None;
    let mut pending: Option<PendingAssertions> = None;
    let name = sys.name.clone();

    let finish = |verdict: Verdict, conclusive: bool, steps: Vec<StepRecord>| RunReport {
        system_name: name.clone(),
        verdict,
        conclusive,
        steps,
    };

    for index in 0..=cap {
        let n = cur.dim();
        let mut filt = linearizability_sequence(&cur, smp, None)?;
        let k = non_involutivity_index(&filt, smp)?;
        if let Some(p) = pending.take() {
            verify_prolongation(&filt, k, &p, smp)?;
        }
        let mut rec = StepRecord::new(index, &cur);
        rec.filtration_ranks = filt.ranks().to_vec();
        rec.k = k;

        let k = match k {
            None => {
                rec.case = CaseLabel::I;
                let rho = filt.ranks().iter().position(|&x| x == n);
                return match rho {
                    Some(rho) => {
                        rec.notes.push(format!(
                            "all levels involutive and level {} spans the tangent space: \
                             static feedback linearizable",
                            rho
                        ));
                        steps.push(rec);
                        Ok(finish(Verdict::Lsopi { ell: index }, true, steps))
                    }
                    None => {
                        let reason = format!(
                            "not controllable: the filtration saturates at rank {} < {}",
                            filt.ranks().last().copied().unwrap_or(0),
                            n
                        );
                        rec.notes.push(reason.clone());
                        steps.push(rec);
                        Ok(finish(Verdict::NotFlat { reason }, true, steps))
                    }
                };
            }
            Some(k) => k,
        };

        if let Some(pk) = prev_k {
            if k <= pk {
                return Err(Error::Internal(format!(
                    "non-involutivity index failed to increase: {} after {}",
                    k, pk
                )));
            }
        }

        let info = classify(&cur, &mut filt, k, smp)?;
        rec.case = info.label;
        rec.r = Some(info.r);
        rec.r_ii = info.r_ii;
        rec.growth = Some(info.growth.clone());
        rec.closure_rank = info.closure_rank;

        if let Some(reason) = flatness_necessary_check(&cur, &filt, &info, smp)? {
            rec.notes.push(reason.clone());
            steps.push(rec);
            return Ok(finish(Verdict::NotFlat { reason }, true, steps));
        }

        // Construct the corank-one involutive subdistribution when the
        // case permits one; otherwise settle the verdict.
        let certified_negative = |reason: String,
                                      mut rec: StepRecord,
                                      notes: Vec<String>,
                                      mut steps: Vec<StepRecord>| {
            rec.notes.extend(notes);
            rec.notes.push(reason.clone());
            steps.push(rec);
            if fallback_steps.is_empty() {
                finish(
                    Verdict::NotLsopi {
                        failing_step: index,
                        reason,
                    },
                    true,
                    steps,
                )
            } else {
                let reason = format!(
                    "{}; a non-forced subdistribution choice was made at step(s) {:?}, \
                     so the negative cannot be certified",
                    reason, fallback_steps
                );
                finish(
                    Verdict::Inconclusive {
                        fallback_steps: fallback_steps.clone(),
                        reason,
                    },
                    false,
                    steps,
                )
            }
        };

        struct Chosen {
            dist: LsopiDistribution,
            special: bool,
        }

        let chosen: Chosen = match info.label {
            CaseLabel::IiA | CaseLabel::IiB => {
                let out = construct_h_case_ii(&cur, &filt, &info, smp)?;
                if let Some(rk) = out.characteristic_rank {
                    rec.notes
                        .push(format!("characteristic rank of the split level: {}", rk));
                }
                match out.dist {
                    Some(dist) => Chosen { dist, special: false },
                    None => {
                        let cond = out
                            .failed_condition
                            .unwrap_or_else(|| "pattern conditions".into());
                        let reason = format!(
                            "no corank-one involutive subdistribution exists: {} (the \
                             pattern conditions are necessary and sufficient)",
                            cond
                        );
                        return Ok(certified_negative(reason, rec, Vec::new(), steps));
                    }
                }
            }
            CaseLabel::IiNoH => {
                let reason = format!(
                    "level {} gains {} directions in one derived step; at most two are \
                     allowed for a linearizable system",
                    k, info.r
                );
                return Ok(certified_negative(reason, rec, Vec::new(), steps));
            }
            CaseLabel::IiiC3 => {
                let reason = "derived growth jumps by two directions right after the \
                              split level: certified negative"
                    .to_string();
                return Ok(certified_negative(reason, rec, Vec::new(), steps));
            }
            CaseLabel::IiiC4 => {
                return Err(Error::Internal(
                    "accessibility screen must reject this case".into(),
                ))
            }
            CaseLabel::IiiC5Prime => {
                let reason = format!(
                    "the drift adds one direction to the closure but level {} only \
                     reaches rank {}: certified negative",
                    k + 1,
                    info.next_level_rank.unwrap_or_default()
                );
                return Ok(certified_negative(reason, rec, Vec::new(), steps));
            }
            CaseLabel::IiiC6 => {
                let reason = "the drift pushes the involutive closure out by two \
                              directions: certified negative"
                    .to_string();
                return Ok(certified_negative(reason, rec, Vec::new(), steps));
            }
            CaseLabel::IiiC1 | CaseLabel::IiiC2 | CaseLabel::IiiC5DoublePrime => {
                match construct_h_case_iii(&cur, &mut filt, &info, smp)? {
                    CaseIiiOutcome::Found {
                        dist,
                        notes,
                        special_assertions,
                        used_fallback,
                    } => {
                        rec.notes.extend(notes);
                        if used_fallback {
                            fallback_steps.push(index);
                            rec.notes.push(
                                "non-forced choice recorded: a later negative ending \
                                 becomes inconclusive"
                                    .into(),
                            );
                        }
                        Chosen {
                            dist,
                            special: special_assertions,
                        }
                    }
                    CaseIiiOutcome::NoneCertified { reason, notes } => {
                        return Ok(certified_negative(reason, rec, notes, steps));
                    }
                    CaseIiiOutcome::NoneUnresolved { reason, notes } => {
                        rec.notes.extend(notes);
                        rec.notes.push(reason.clone());
                        steps.push(rec);
                        fallback_steps.push(index);
                        return Ok(finish(
                            Verdict::Inconclusive {
                                fallback_steps: fallback_steps.clone(),
                                reason,
                            },
                            false,
                            steps,
                        ));
                    }
                    CaseIiiOutcome::GuaranteedWithoutWitness { note } => {
                        rec.notes.push(note);
                        steps.push(rec);
                        return Ok(finish(Verdict::Lsopi { ell: index + 1 }, true, steps));
                    }
                }
            }
            CaseLabel::I => unreachable!("a split level exists"),
        };

        // Record the construction and prolong.
        let dist = chosen.dist;
        let names = cur.vars().names();
        rec.h_generators = Some(
            dist.h
                .gens()
                .iter()
                .map(|g| format!("({})", g.display_components().join(", ")))
                .collect(),
        );
        rec.beta_column = Some((
            dist.beta.0.to_display(names),
            dist.beta.1.to_display(names),
        ));
        rec.prolonged_control = Some(render_prolonged_control(&dist.beta.0, &dist.beta.1, names));
        match dist.uniqueness {
            Uniqueness::Unique => rec.notes.push("subdistribution is unique".into()),
            Uniqueness::ChosenCanonically => rec
                .notes
                .push("subdistribution chosen from the canonical candidate family".into()),
            Uniqueness::SpecialC5 => rec
                .notes
                .push("special choice: gains one more involutive level after prolongation".into()),
        }

        let next = build_prolongation(&cur, &dist, index)?;
        let lifted_gens: Vec<VectorField> = std::iter::once(VectorField::unit(
            next.vars().clone(),
            cur.dim(),
        ))
        .chain(dist.h.gens().iter().map(|g| g.lifted(next.vars())))
        .collect();
        pending = Some(PendingAssertions {
            k,
            expected_level: Distribution::new(next.vars().clone(), lifted_gens),
            special: chosen.special,
        });
        steps.push(rec);
        prev_k = Some(k);
        cur = next;
    }
    Err(Error::Internal(format!(
        "step budget of {} exhausted without reaching a verdict",
        cap
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse_expr;

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
        ControlAffineSystem::new(
            name,
            v.clone(),
            field(&v, f),
            field(&v, g1),
            field(&v, g2),
        )
        .unwrap()
    }

    /// Five states, one triangular chain: the split level carries a
    /// rank-2k characteristic distribution (pattern B).
    fn pattern_b_system() -> ControlAffineSystem {
        sys(
            "pattern-b",
            &["x1", "x2", "x3", "x4", "x5"],
            &["-x4", "-x5", "-x5^2/2", "0", "0"],
            &["0", "0", "0", "0", "1"],
            &["0", "0", "0", "1", "0"],
        )
    }

    /// Six states: the split level has mixed-bracket corank one and a
    /// rank-(2k-1) characteristic distribution (pattern A).
    fn pattern_a_system() -> ControlAffineSystem {
        sys(
            "pattern-a",
            &["x1", "x2", "x3", "x4", "x5", "x6"],
            &["-x4", "-x5", "-x5^2/2", "0", "0", "-x2*x4"],
            &["0", "0", "0", "0", "1", "0"],
            &["0", "0", "0", "1", "0", "0"],
        )
    }

    #[test]
    fn pattern_b_classification_and_construction() {
        let s = pattern_b_system();
        let smp = smp();
        let mut filt = linearizability_sequence(&s, &smp, None).unwrap();
        let k = non_involutivity_index(&filt, &smp).unwrap().unwrap();
        assert_eq!(k, 1);
        let info = classify(&s, &mut filt, k, &smp).unwrap();
        assert_eq!(info.label, CaseLabel::IiB);
        assert_eq!(info.r, 1);
        assert_eq!(info.r_ii, Some(1));
        let out = construct_h_case_ii(&s, &filt, &info, &smp).unwrap();
        assert_eq!(out.characteristic_rank, Some(2));
        let dist = out.dist.expect("pattern B constructs a distribution");
        assert_eq!(dist.uniqueness, Uniqueness::Unique);
        // H = span{d/dx4, d/dx5, d/dx1}.
        let v = s.vars().clone();
        let expected = Distribution::new(
            v.clone(),
            vec![
                VectorField::unit(v.clone(), 3),
                VectorField::unit(v.clone(), 4),
                VectorField::unit(v.clone(), 0),
            ],
        );
        assert!(dist.h.same_span(&expected, &smp).unwrap());
        assert!(dist.beta.0.is_zero());
        assert!(dist.beta.1.is_one());
        assert_eq!(dist.tilde_g2, field(&v, &["0", "0", "0", "1", "0"]));
        assert!(dist.first_column_e1);
    }

    #[test]
    fn pattern_b_prolongation_shape() {
        let s = pattern_b_system();
        let smp = smp();
        let mut filt = linearizability_sequence(&s, &smp, None).unwrap();
        let info = classify(&s, &mut filt, 1, &smp).unwrap();
        let dist = construct_h_case_ii(&s, &filt, &info, &smp)
            .unwrap()
            .dist
            .unwrap();
        let p = build_prolongation(&s, &dist, 0).unwrap();
        assert_eq!(p.name, "pattern-b.p1");
        assert_eq!(p.dim(), 6);
        assert_eq!(p.vars().name(5), "u1_0");
        // Drift picks up the prolonged state times the old g1.
        let pv = p.vars().clone();
        assert_eq!(
            p.f(),
            &field(&pv, &["-x4", "-x5", "-x5^2/2", "0", "u1_0", "0"])
        );
        assert_eq!(p.g1(), &VectorField::unit(pv.clone(), 5));
        assert_eq!(p.g2(), &field(&pv, &["0", "0", "0", "1", "0", "0"]));
    }

    #[test]
    fn pattern_b_run_ends_not_flat_after_one_prolongation() {
        // The prolonged system gains only one direction at its split
        // level, which the flatness screen rejects.
        let s = pattern_b_system();
        let rep = run_lsopi(&s, None, &smp()).unwrap();
        assert_eq!(rep.steps.len(), 2);
        assert_eq!(rep.steps[0].case, CaseLabel::IiB);
        assert_eq!(
            rep.steps[0].beta_column,
            Some(("0".to_string(), "1".to_string()))
        );
        assert_eq!(rep.steps[0].prolonged_control.as_deref(), Some("u1"));
        match &rep.verdict {
            Verdict::NotFlat { reason } => assert!(reason.contains("corank deficiency")),
            v => panic!("unexpected verdict {:?}", v),
        }
        assert!(rep.conclusive);
    }

    #[test]
    fn pattern_a_classification_and_construction() {
        let s = pattern_a_system();
        let smp = smp();
        let mut filt = linearizability_sequence(&s, &smp, None).unwrap();
        let k = non_involutivity_index(&filt, &smp).unwrap().unwrap();
        assert_eq!(k, 1);
        let info = classify(&s, &mut filt, k, &smp).unwrap();
        assert_eq!(info.label, CaseLabel::IiA);
        assert_eq!(info.r, 2);
        assert_eq!(info.r_ii, Some(1));
        let out = construct_h_case_ii(&s, &filt, &info, &smp).unwrap();
        assert_eq!(out.characteristic_rank, Some(1));
        let dist = out.dist.expect("pattern A constructs a distribution");
        let v = s.vars().clone();
        let expected = Distribution::new(
            v.clone(),
            vec![
                VectorField::unit(v.clone(), 4),
                VectorField::unit(v.clone(), 3),
                field(&v, &["1", "0", "0", "0", "0", "x2"]),
            ],
        );
        assert!(dist.h.same_span(&expected, &smp).unwrap());
        assert!(dist.beta.0.is_zero());
        assert!(dist.beta.1.is_one());
    }

    #[test]
    fn pattern_a_fails_when_characteristic_space_collapses() {
        // Coupling x4 into the third equation kills the characteristic
        // distribution of the split level; the conditions are sufficient
        // and necessary, so the failure certifies the negative.
        let s = sys(
            "pattern-a-degenerate",
            &["x1", "x2", "x3", "x4", "x5", "x6"],
            &["-x4", "-x5", "-x4*x5 - x5^2/2", "0", "0", "-x2*x4"],
            &["0", "0", "0", "0", "1", "0"],
            &["0", "0", "0", "1", "0", "0"],
        );
        let smp = smp();
        let mut filt = linearizability_sequence(&s, &smp, None).unwrap();
        let k = non_involutivity_index(&filt, &smp).unwrap().unwrap();
        assert_eq!(k, 1);
        let info = classify(&s, &mut filt, k, &smp).unwrap();
        assert_eq!(info.label, CaseLabel::IiA);
        let out = construct_h_case_ii(&s, &filt, &info, &smp).unwrap();
        assert!(out.dist.is_none());
        assert!(out.failed_condition.unwrap().contains("2k-1"));
        assert_eq!(out.characteristic_rank, Some(0));
        let rep = run_lsopi(&s, None, &smp).unwrap();
        match &rep.verdict {
            Verdict::NotLsopi { failing_step, .. } => assert_eq!(*failing_step, 0),
            v => panic!("unexpected verdict {:?}", v),
        }
        assert!(rep.conclusive);
    }

    #[test]
    fn brunovsky_form_is_linearizable_without_prolongation() {
        let s = sys(
            "brunovsky",
            &["x1", "x2", "x3", "x4"],
            &["x3", "x4", "0", "0"],
            &["0", "0", "1", "0"],
            &["0", "0", "0", "1"],
        );
        let rep = run_lsopi(&s, None, &smp()).unwrap();
        assert_eq!(rep.verdict, Verdict::Lsopi { ell: 0 });
        assert!(rep.conclusive);
        assert_eq!(rep.steps.len(), 1);
        assert_eq!(rep.steps[0].case, CaseLabel::I);
    }

    #[test]
    fn uncontrollable_system_is_not_flat() {
        let s = sys(
            "uncontrollable",
            &["x1", "x2", "x3"],
            &["0", "0", "0"],
            &["1", "0", "0"],
            &["0", "1", "0"],
        );
        let rep = run_lsopi(&s, None, &smp()).unwrap();
        match &rep.verdict {
            Verdict::NotFlat { reason } => assert!(reason.contains("not controllable")),
            v => panic!("unexpected verdict {:?}", v),
        }
        assert!(rep.conclusive);
        assert_eq!(rep.steps[0].case, CaseLabel::I);
    }

    #[test]
    fn drift_invariant_closure_is_not_flat() {
        // Non-involutive input pair whose closure is a proper
        // drift-invariant subbundle.
        let s = sys(
            "inaccessible",
            &["x1", "x2", "x3", "x4"],
            &["0", "0", "0", "x4"],
            &["1", "0", "0", "0"],
            &["0", "1", "x1", "0"],
        );
        let rep = run_lsopi(&s, None, &smp()).unwrap();
        assert_eq!(rep.steps[0].case, CaseLabel::IiiC4);
        assert_eq!(rep.steps[0].k, Some(0));
        match &rep.verdict {
            Verdict::NotFlat { reason } => {
                assert!(reason.contains("not strongly accessible"))
            }
            v => panic!("unexpected verdict {:?}", v),
        }
        assert!(rep.conclusive);
    }

    #[test]
    fn beta_column_of_given_subdistribution() {
        let s = pattern_b_system();
        let v = s.vars().clone();
        let h = Distribution::new(
            v.clone(),
            vec![
                VectorField::unit(v.clone(), 3),
                VectorField::unit(v.clone(), 4),
                VectorField::unit(v.clone(), 0),
            ],
        );
        let (b1, b2) = extract_beta_column(&s, &h, &smp()).unwrap();
        assert!(b1.is_zero());
        assert!(b2.is_one());
    }

    #[test]
    fn control_rendering() {
        let one = RatFun::one(2);
        let zero = RatFun::zero(2);
        let x1 = RatFun::var(2, 0);
        let names = vec!["x1".to_string(), "x2".to_string()];
        assert_eq!(render_prolonged_control(&zero, &one, &names), "u1");
        assert_eq!(render_prolonged_control(&one, &zero, &names), "-u2");
        assert_eq!(render_prolonged_control(&one, &one, &names), "u1 - u2");
        assert_eq!(
            render_prolonged_control(&x1, &RatFun::from_int(2, 3), &names),
            "3*u1 - x1*u2"
        );
    }

    #[test]
    fn affinize_general_two_input_system() {
        let states = vec!["x1".to_string(), "x2".to_string()];
        let controls = ["u1".to_string(), "u2".to_string()];
        let all = Vars::from_strs(&["x1", "x2", "u1", "u2"]);
        let rhs = vec![
            parse_expr("u1", &all).unwrap(),
            parse_expr("x1*u2 + u1^2", &all).unwrap(),
        ];
        let s = affinize("general", &states, &controls, &rhs, &smp()).unwrap();
        assert_eq!(s.dim(), 4);
        let v = s.vars().clone();
        assert_eq!(s.f(), &field(&v, &["u1", "x1*u2 + u1^2", "0", "0"]));
        assert_eq!(s.g1(), &VectorField::unit(v.clone(), 2));
        assert_eq!(s.g2(), &VectorField::unit(v.clone(), 3));
    }

    #[test]
    fn affinize_rejects_rank_deficient_controls() {
        let states = vec!["x1".to_string(), "x2".to_string()];
        let controls = ["u1".to_string(), "u2".to_string()];
        let all = Vars::from_strs(&["x1", "x2", "u1", "u2"]);
        let rhs = vec![
            parse_expr("u1", &all).unwrap(),
            parse_expr("2*u1", &all).unwrap(),
        ];
        assert!(affinize("degenerate", &states, &controls, &rhs, &smp()).is_err());
    }
}
