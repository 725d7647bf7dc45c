//! Differential-geometric toolbox: vector fields with rational-function
//! components, Lie brackets, distributions spanned by finitely many fields,
//! the linearizability filtration of a two-input control-affine system, and
//! involutivity machinery (closures, characteristic distributions, growth
//! vectors, coranks).
//!
//! All spans are over the field of rational functions; ranks are generic
//! ranks computed by [`crate::funlinalg`].

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::funlinalg::{
    budget_error, clear_denominators, clear_denominators_with_factor, generic_rank,
    kernel_basis, oversized_fun, solve_membership, FunMatrix, Sampler,
};
use crate::symcore::{Expr, RatFun, Vars};

/// A vector field on the state manifold: one rational-function component
/// per state coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    vars: Vars,
    comps: Vec<RatFun>,
}

impl VectorField {
    pub fn new(vars: Vars, comps: Vec<RatFun>) -> Result<VectorField> {
        if comps.len() != vars.len() {
            return Err(Error::Dimension(format!(
                "vector field has {} components for {} coordinates",
                comps.len(),
                vars.len()
            )));
        }
        Ok(VectorField { vars, comps })
    }

    pub fn zero(vars: Vars) -> VectorField {
        let n = vars.len();
        VectorField {
            vars,
            comps: vec![RatFun::zero(n); n],
        }
    }

    /// Coordinate vector field (all zeros, 1 in position `i`).
    pub fn unit(vars: Vars, i: usize) -> VectorField {
        let n = vars.len();
        let mut comps = vec![RatFun::zero(n); n];
        comps[i] = RatFun::one(n);
        VectorField { vars, comps }
    }

    pub fn from_exprs(vars: Vars, exprs: &[Expr]) -> Result<VectorField> {
        let comps = exprs
            .iter()
            .map(|e| e.canon())
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(vars, comps)
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[RatFun] {
        &self.comps
    }

    pub fn at(&self, i: usize) -> &RatFun {
        &self.comps[i]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(RatFun::is_zero)
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: self.comps.iter().map(RatFun::neg).collect(),
        }
    }

    pub fn scale(&self, c: &RatFun) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: self.comps.iter().map(|a| a.mul(c)).collect(),
        }
    }

    /// Primitive denominator-cleared representative of the same direction.
    pub fn cleared(&self) -> VectorField {
        VectorField {
            vars: self.vars.clone(),
            comps: clear_denominators(&self.comps),
        }
    }

    /// Lift to a product manifold whose coordinates extend this field's
    /// coordinates: old components are reinterpreted over the larger
    /// variable set, new components are zero.
    pub fn lifted(&self, new_vars: &Vars) -> VectorField {
        assert!(
            new_vars.len() >= self.vars.len(),
            "lift target must extend the coordinate list"
        );
        let arity = new_vars.len();
        let mut comps: Vec<RatFun> = self.comps.iter().map(|c| c.extended(arity)).collect();
        comps.resize(arity, RatFun::zero(arity));
        VectorField {
            vars: new_vars.clone(),
            comps,
        }
    }

    /// Cleared representative together with the scalar `c` such that
    /// `cleared = c * self`.
    pub fn cleared_with_factor(&self) -> (VectorField, RatFun) {
        let (comps, factor) = clear_denominators_with_factor(&self.comps);
        (
            VectorField {
                vars: self.vars.clone(),
                comps,
            },
            factor,
        )
    }

    /// Render components for reports.
    pub fn display_components(&self) -> Vec<String> {
        self.comps
            .iter()
            .map(|c| c.to_display(self.vars.names()))
            .collect()
    }
}

/// Lie bracket `[V, W] = (DW) V - (DV) W`, computed exactly.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> VectorField {
    let n = v.dim();
    debug_assert_eq!(n, w.dim());
    let mut comps = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = RatFun::zero(n);
        for j in 0..n {
            if !v.comps[j].is_zero() {
                acc = acc.add(&w.comps[i].derivative(j).mul(&v.comps[j]));
            }
            if !w.comps[j].is_zero() {
                acc = acc.sub(&v.comps[i].derivative(j).mul(&w.comps[j]));
            }
        }
        comps.push(acc);
    }
    VectorField {
        vars: v.vars.clone(),
        comps,
    }
}

/// Iterated adjoint `ad_f^q g = [f, [f, ... [f, g]]]`.
pub fn ad(f: &VectorField, g: &VectorField, q: usize) -> VectorField {
    let mut acc = g.clone();
    for _ in 0..q {
        acc = lie_bracket(f, &acc);
    }
    acc
}

/// A distribution presented by an ordered list of generating vector fields.
/// The generic rank is computed on demand and cached.
#[derive(Clone, Debug)]
pub struct Distribution {
    vars: Vars,
    gens: Vec<VectorField>,
    rank: OnceLock<usize>,
}

impl Distribution {
    pub fn new(vars: Vars, gens: Vec<VectorField>) -> Distribution {
        Distribution {
            vars,
            gens,
            rank: OnceLock::new(),
        }
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn gens(&self) -> &[VectorField] {
        &self.gens
    }

    pub fn num_gens(&self) -> usize {
        self.gens.len()
    }

    pub fn dim_space(&self) -> usize {
        self.vars.len()
    }

    /// Matrix whose columns are the generator components.
    pub fn matrix(&self) -> FunMatrix {
        let n = self.vars.len();
        let cols: Vec<Vec<RatFun>> = self.gens.iter().map(|g| g.comps().to_vec()).collect();
        FunMatrix::from_columns(n, n, &cols).expect("generator dimensions agree")
    }

    pub fn rank(&self, smp: &Sampler) -> Result<usize> {
        if let Some(&r) = self.rank.get() {
            return Ok(r);
        }
        let r = generic_rank(&self.matrix(), smp)?;
        let _ = self.rank.set(r);
        Ok(r)
    }

    /// Test membership of a field in the span (over the function field).
    pub fn contains(&self, v: &VectorField, smp: &Sampler) -> Result<bool> {
        if self.gens.is_empty() {
            return Ok(v.is_zero());
        }
        Ok(solve_membership(v.comps(), &self.matrix(), smp)?.is_some())
    }

    /// New distribution with extra generators appended.
    pub fn with_appended(&self, extra: &[VectorField]) -> Distribution {
        let mut gens = self.gens.clone();
        gens.extend(extra.iter().cloned());
        Distribution::new(self.vars.clone(), gens)
    }

    /// Span equality.
    pub fn same_span(&self, other: &Distribution, smp: &Sampler) -> Result<bool> {
        for g in &other.gens {
            if !self.contains(g, smp)? {
                return Ok(false);
            }
        }
        for g in &self.gens {
            if !other.contains(g, smp)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Two-input control-affine system `xdot = f(x) + u1 g1(x) + u2 g2(x)`.
#[derive(Clone, Debug)]
pub struct ControlAffineSystem {
    pub name: String,
    vars: Vars,
    f: VectorField,
    g1: VectorField,
    g2: VectorField,
}

impl ControlAffineSystem {
    pub fn new(
        name: impl Into<String>,
        vars: Vars,
        f: VectorField,
        g1: VectorField,
        g2: VectorField,
    ) -> Result<ControlAffineSystem> {
        let n = vars.len();
        for (label, fld) in [("f", &f), ("g1", &g1), ("g2", &g2)] {
            if fld.dim() != n {
                return Err(Error::Dimension(format!(
                    "field {} has {} components for {} states",
                    label,
                    fld.dim(),
                    n
                )));
            }
        }
        Ok(ControlAffineSystem {
            name: name.into(),
            vars,
            f,
            g1,
            g2,
        })
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn f(&self) -> &VectorField {
        &self.f
    }

    pub fn g1(&self) -> &VectorField {
        &self.g1
    }

    pub fn g2(&self) -> &VectorField {
        &self.g2
    }

    pub fn g(&self, i: usize) -> &VectorField {
        match i {
            0 => &self.g1,
            1 => &self.g2,
            _ => panic!("control index out of range"),
        }
    }

    /// The input distribution span{g1, g2} must have generic rank 2.
    pub fn validate_input_rank(&self, smp: &Sampler) -> Result<()> {
        let d = Distribution::new(self.vars.clone(), vec![self.g1.clone(), self.g2.clone()]);
        let r = d.rank(smp)?;
        if r != 2 {
            return Err(Error::Validation(format!(
                "input vector fields g1, g2 span rank {} instead of 2",
                r
            )));
        }
        Ok(())
    }
}

/// The linearizability filtration `D^0 subset D^1 subset ...` where `D^j` is
/// spanned by `ad_f^q g_i` for `0 <= q <= j`, `i = 1, 2`. Levels are
/// computed until the rank saturates (or a caller-provided cap).
#[derive(Clone, Debug)]
pub struct Filtration {
    /// `ads[q] = (ad_f^q g1, ad_f^q g2)` up to per-generator rescaling: each
    /// stored field is a denominator-cleared primitive representative.
    ads: Vec<(VectorField, VectorField)>,
    /// `scales[q] = (s1, s2)` with `ads[q].i = s_i * ad_f^q g_i` modulo the
    /// previous level `D^{q-1}`. Needed to recover true coefficient ratios
    /// (feedback columns) from the normalized generators.
    scales: Vec<(RatFun, RatFun)>,
    levels: Vec<Distribution>,
    ranks: Vec<usize>,
    /// True when the last computed level already has stable rank (the next
    /// level would span the same distribution).
    saturated: bool,
}

impl Filtration {
    pub fn levels(&self) -> &[Distribution] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> &Distribution {
        &self.levels[j]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// `ad_f^q g_i` with `i` in `{0, 1}` for `g1, g2`, up to rescaling and a
    /// correction in `D^{q-1}` (see [`Filtration::ad_scale`]).
    pub fn ad_gen(&self, q: usize, i: usize) -> &VectorField {
        let pair = &self.ads[q];
        match i {
            0 => &pair.0,
            1 => &pair.1,
            _ => panic!("control index out of range"),
        }
    }

    /// Scalar `s` with `ad_gen(q, i) = s * ad_f^q g_i` modulo `D^{q-1}`.
    pub fn ad_scale(&self, q: usize, i: usize) -> &RatFun {
        let pair = &self.scales[q];
        match i {
            0 => &pair.0,
            1 => &pair.1,
            _ => panic!("control index out of range"),
        }
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Make sure the generator table holds `ad_f^q g_i` for all `q <= qmax`
    /// (levels past saturation are never added, only the raw generators).
    pub fn ensure_ads(&mut self, sys: &ControlAffineSystem, qmax: usize) {
        while self.ads.len() <= qmax {
            let last = self.ads.last().expect("base generators present");
            let (a1, s1) = lie_bracket(sys.f(), &last.0).cleared_with_factor();
            let (a2, s2) = lie_bracket(sys.f(), &last.1).cleared_with_factor();
            let prev = self.scales.last().expect("base scales present");
            self.scales.push((s1.mul(&prev.0), s2.mul(&prev.1)));
            self.ads.push((a1, a2));
        }
    }

    /// Distribution spanned by generators `ad_f^q g_i` for `q <= j`.
    fn build_level(&self, vars: &Vars, j: usize) -> Distribution {
        let mut gens = Vec::with_capacity(2 * (j + 1));
        for q in 0..=j {
            gens.push(self.ads[q].0.clone());
            gens.push(self.ads[q].1.clone());
        }
        Distribution::new(vars.clone(), gens)
    }
}

/// Compute the filtration up to rank saturation, capped at `jmax`
/// (defaults to `n - 1`, beyond which nothing new can appear for the
/// static-feedback test).
pub fn linearizability_sequence(
    sys: &ControlAffineSystem,
    smp: &Sampler,
    jmax: Option<usize>,
) -> Result<Filtration> {
    let n = sys.dim();
    let cap = jmax.unwrap_or_else(|| n.saturating_sub(1).max(1));
    let one = RatFun::one(n);
    let mut filt = Filtration {
        ads: vec![(sys.g1.clone(), sys.g2.clone())],
        scales: vec![(one.clone(), one)],
        levels: Vec::new(),
        ranks: Vec::new(),
        saturated: false,
    };
    let d0 = filt.build_level(sys.vars(), 0);
    let r0 = d0.rank(smp)?;
    filt.levels.push(d0);
    filt.ranks.push(r0);
    let mut j = 0;
    loop {
        if filt.ranks[j] == n || j >= cap {
            return Ok(filt);
        }
        filt.ensure_ads(sys, j + 1);
        let dj = filt.build_level(sys.vars(), j + 1);
        let rj = dj.rank(smp)?;
        if rj == filt.ranks[j] {
            // Same span as the previous level: the filtration is stable.
            filt.saturated = true;
            return Ok(filt);
        }
        filt.levels.push(dj);
        filt.ranks.push(rj);
        j += 1;
    }
}

/// Bracket sweeps multiply generator components pairwise, so oversized
/// generators are rejected before any bracket is formed; this keeps every
/// sweep's cost proportional to the same budget that bounds eliminations.
fn gate_generators(gens: &[VectorField], site: &str) -> Result<()> {
    for g in gens {
        if g.comps().iter().any(oversized_fun) {
            return Err(budget_error(site));
        }
    }
    Ok(())
}

/// Involutivity test: brackets of all generator pairs stay in the span.
pub fn is_involutive(d: &Distribution, smp: &Sampler) -> Result<bool> {
    let g = d.gens();
    if g.len() <= 1 {
        return Ok(true);
    }
    gate_generators(g, "an involutivity bracket sweep")?;
    let base_rank = d.rank(smp)?;
    let mut brackets = Vec::new();
    for i in 0..g.len() {
        for j in (i + 1)..g.len() {
            let b = lie_bracket(&g[i], &g[j]).cleared();
            if !b.is_zero() {
                brackets.push(b);
            }
        }
    }
    if brackets.is_empty() {
        return Ok(true);
    }
    let ext = d.with_appended(&brackets);
    Ok(ext.rank(smp)? == base_rank)
}

/// Index of the first non-involutive level of the filtration, if any.
pub fn non_involutivity_index(filt: &Filtration, smp: &Sampler) -> Result<Option<usize>> {
    for (j, level) in filt.levels().iter().enumerate() {
        if !is_involutive(level, smp)? {
            return Ok(Some(j));
        }
    }
    Ok(None)
}

/// One derived-flag step: `D + [D, D]`, returned with a pruned generator
/// list (original generators plus the independent new brackets, in
/// deterministic order).
pub fn derived_step(d: &Distribution, smp: &Sampler) -> Result<Distribution> {
    let g = d.gens();
    gate_generators(g, "a derived-flag bracket sweep")?;
    let base_rank = d.rank(smp)?;
    let mut cur = d.clone();
    let mut cur_rank = base_rank;
    for i in 0..g.len() {
        for j in (i + 1)..g.len() {
            if cur_rank == d.dim_space() {
                return Ok(cur);
            }
            let b = lie_bracket(&g[i], &g[j]).cleared();
            if b.is_zero() {
                continue;
            }
            let ext = cur.with_appended(std::slice::from_ref(&b));
            let r = ext.rank(smp)?;
            if r > cur_rank {
                cur = ext;
                cur_rank = r;
            }
        }
    }
    Ok(cur)
}

/// Smallest involutive distribution containing `d` (iterated derived flag
/// until the rank stabilizes).
pub fn involutive_closure(d: &Distribution, smp: &Sampler) -> Result<Distribution> {
    let mut cur = d.clone();
    let mut rank = cur.rank(smp)?;
    loop {
        let next = derived_step(&cur, smp)?;
        let next_rank = next.rank(smp)?;
        if next_rank == rank {
            return Ok(cur);
        }
        cur = next;
        rank = next_rank;
    }
}

/// Growth vector of the derived flag: ranks of `E^0 = D`,
/// `E^{j+1} = E^j + [E^j, E^j]`, until stabilization or `cap` entries.
pub fn growth_vector(d: &Distribution, smp: &Sampler, cap: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = d.clone();
    let mut rank = cur.rank(smp)?;
    out.push(rank);
    while out.len() < cap {
        let next = derived_step(&cur, smp)?;
        let next_rank = next.rank(smp)?;
        if next_rank == rank {
            break;
        }
        out.push(next_rank);
        cur = next;
        rank = next_rank;
    }
    Ok(out)
}

/// Characteristic distribution `C(D) = { xi in D : [xi, D] subset D }`.
///
/// Brackets of the generators are reduced modulo the span of `D` via the
/// left null space of the generator matrix; the coefficient functions of a
/// characteristic section then solve a linear system over the function
/// field. The result is always involutive, which is re-verified.
pub fn characteristic_distribution(d: &Distribution, smp: &Sampler) -> Result<Distribution> {
    let g = d.gens();
    let n = d.dim_space();
    if g.is_empty() {
        return Ok(d.clone());
    }
    gate_generators(g, "a characteristic-system assembly")?;
    let gm = d.matrix();
    let r = d.rank(smp)?;
    if r == n {
        // D is the whole tangent space; every section is characteristic.
        return Ok(d.clone());
    }
    // Left null space of the generator matrix: rows annihilating span(D).
    let gt = transpose(&gm);
    let lnull = kernel_basis(&gt, smp)?;
    debug_assert_eq!(lnull.len(), n - r);
    if lnull.is_empty() {
        return Ok(d.clone());
    }
    // Unknowns: one coefficient per generator. For each generator g_j and
    // each left-null row w: sum_i alpha_i * (w . [g_i, g_j]) = 0.
    let dlen = g.len();
    let mut rows: Vec<Vec<RatFun>> = Vec::new();
    // Cache brackets [g_i, g_j] for i < j; antisymmetry covers the rest.
    let mut bracket = vec![vec![None::<VectorField>; dlen]; dlen];
    for i in 0..dlen {
        for j in (i + 1)..dlen {
            bracket[i][j] = Some(lie_bracket(&g[i], &g[j]));
        }
    }
    let zero = RatFun::zero(n);
    for j in 0..dlen {
        for w in &lnull {
            let mut row = Vec::with_capacity(dlen);
            for i in 0..dlen {
                if i == j {
                    row.push(zero.clone());
                    continue;
                }
                let b = if i < j {
                    bracket[i][j].as_ref().expect("cached").clone()
                } else {
                    bracket[j][i].as_ref().expect("cached").neg()
                };
                let mut acc = RatFun::zero(n);
                for t in 0..n {
                    if !w[t].is_zero() && !b.comps()[t].is_zero() {
                        acc = acc.add(&w[t].mul(&b.comps()[t]));
                    }
                }
                row.push(acc);
            }
            if row.iter().all(RatFun::is_zero) {
                continue;
            }
            rows.push(row);
        }
    }
    let coeffs = if rows.is_empty() {
        // No obstruction: D is involutive, C(D) = D.
        return Ok(d.clone());
    } else {
        let data: Vec<RatFun> = rows.iter().flatten().cloned().collect();
        let m = FunMatrix::new(rows.len(), dlen, n, data)?;
        kernel_basis(&m, smp)?
    };
    let mut gens = Vec::new();
    for alpha in coeffs {
        let mut v = VectorField::zero(d.vars().clone());
        for (i, a) in alpha.iter().enumerate() {
            if !a.is_zero() {
                v = v.add(&g[i].scale(a));
            }
        }
        if !v.is_zero() {
            gens.push(v.cleared());
        }
    }
    let c = Distribution::new(d.vars().clone(), gens);
    if !is_involutive(&c, smp)? {
        return Err(Error::Internal(
            "characteristic distribution failed involutivity check".into(),
        ));
    }
    Ok(c)
}

fn transpose(m: &FunMatrix) -> FunMatrix {
    let mut out = FunMatrix::zero(m.cols(), m.rows(), m.arity());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out.set(c, r, m.at(r, c).clone());
        }
    }
    out
}

/// Corank of an inclusion `inner subset outer`. Every generator of `inner`
/// is first verified to lie in `outer`.
pub fn corank(inner: &Distribution, outer: &Distribution, smp: &Sampler) -> Result<usize> {
    for (idx, g) in inner.gens().iter().enumerate() {
        if !outer.contains(g, smp)? {
            return Err(Error::InclusionViolation(format!(
                "generator {} of the inner distribution is not in the outer span",
                idx
            )));
        }
    }
    Ok(outer.rank(smp)? - inner.rank(smp)?)
}

/// Static-feedback linearizability data for a control-affine system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SflResult {
    /// Every filtration level is involutive (up to saturation).
    pub all_involutive: bool,
    /// Smallest `rho` with `rank D^rho = n`, when the filtration fills the
    /// tangent space.
    pub rho: Option<usize>,
}

impl SflResult {
    pub fn linearizable(&self) -> bool {
        self.all_involutive && self.rho.is_some()
    }
}

/// Test static-feedback linearizability: all filtration levels involutive
/// with full-rank saturation.
pub fn is_sfl(sys: &ControlAffineSystem, smp: &Sampler) -> Result<SflResult> {
    let filt = linearizability_sequence(sys, smp, None)?;
    let n = sys.dim();
    let rho = filt.ranks().iter().position(|&r| r == n);
    let mut all_involutive = true;
    for level in filt.levels() {
        if !is_involutive(level, smp)? {
            all_involutive = false;
            break;
        }
    }
    Ok(SflResult {
        all_involutive,
        rho,
    })
}
