//! Temporary profiling harness for the property-suite generator. Deleted
//! before release.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsopi_core::funlinalg::Sampler;
use lsopi_core::geometry::{
    ad, characteristic_distribution, involutive_closure, is_involutive, linearizability_sequence,
    non_involutivity_index, ControlAffineSystem, Distribution, VectorField,
};
use lsopi_core::lsopi::{classify, construct_h_case_ii, construct_h_case_iii, CaseLabel};
use lsopi_core::symcore::{RatFun, Vars};

/// Sparse low-degree random scalar: up to two terms, each a small integer
/// times at most one variable (times a second variable only in low
/// dimension, where exact elimination stays cheap).
fn random_ratfun(rng: &mut ChaCha8Rng, arity: usize) -> RatFun {
    let mut acc = RatFun::zero(arity);
    for _ in 0..rng.random_range(0..=2u32) {
        let c = rng.random_range(-2..=2i64);
        if c == 0 {
            continue;
        }
        let mut term = RatFun::from_int(arity, c);
        if rng.random_range(0..4u32) > 0 {
            term = term.mul(&RatFun::var(arity, rng.random_range(0..arity)));
            if arity <= 4 && rng.random_range(0..4u32) == 0 {
                term = term.mul(&RatFun::var(arity, rng.random_range(0..arity)));
            }
        }
        acc = acc.add(&term);
    }
    acc
}

fn random_field(rng: &mut ChaCha8Rng, vars: &Vars) -> VectorField {
    let n = vars.len();
    let comps = (0..n).map(|_| random_ratfun(rng, n)).collect();
    VectorField::new(vars.clone(), comps).unwrap()
}

fn random_system(rng: &mut ChaCha8Rng, idx: usize) -> Option<ControlAffineSystem> {
    let n = rng.random_range(3..=6usize);
    let names: Vec<String> = (1..=n).map(|i| format!("x{}", i)).collect();
    let vars = Vars::new(names);
    for _ in 0..10 {
        let f = random_field(rng, &vars);
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        if j == i {
            j = (j + 1) % n;
        }
        let g1 = VectorField::unit(vars.clone(), i).add(&random_field(rng, &vars));
        let g2 = VectorField::unit(vars.clone(), j).add(&random_field(rng, &vars));
        let Ok(sys) = ControlAffineSystem::new(format!("random-{}", idx), vars.clone(), f, g1, g2)
        else {
            continue;
        };
        let smp = Sampler::default();
        if sys.validate_input_rank(&smp).is_ok() {
            return Some(sys);
        }
    }
    None
}

/// Degree/size guard: total degree and term count of every numerator in
/// the distribution's generators.
fn tractable(d: &Distribution) -> bool {
    d.gens().iter().all(|g| {
        g.comps().iter().all(|c| {
            let num_terms = c.num().terms().count();
            let deg = c
                .num()
                .terms()
                .map(|(m, _)| m.0.iter().map(|&e| e as usize).sum::<usize>())
                .max()
                .unwrap_or(0);
            num_terms <= 12 && deg <= 3
        })
    })
}

#[test]
#[ignore]
fn profile_generator() {
    let smp = Sampler::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut log = std::fs::File::create("/tmp/prof.log").unwrap();
    let total = Instant::now();
    let mut skipped = 0usize;
    let mut classified = 0usize;
    let mut with_h = 0usize;
    for idx in 0..200 {
        let t0 = Instant::now();
        let Some(sys) = random_system(&mut rng, idx) else {
            continue;
        };
        let d1 = Distribution::new(
            sys.vars().clone(),
            vec![
                sys.g1().clone(),
                sys.g2().clone(),
                ad(sys.f(), sys.g1(), 1),
                ad(sys.f(), sys.g2(), 1),
            ],
        );
        if !tractable(&d1) {
            skipped += 1;
            continue;
        }
        let t1 = Instant::now();
        write!(log, "[{} at=char]", idx).unwrap();
        log.flush().unwrap();
        let cres = characteristic_distribution(&d1, &smp);
        let t2 = Instant::now();
        write!(log, "[{} at=clos]", idx).unwrap();
        log.flush().unwrap();
        let clres = involutive_closure(&d1, &smp);
        let t3 = Instant::now();
        write!(log, "[{} at=probe]", idx).unwrap();
        log.flush().unwrap();
        let probe = (|| -> Result<(bool, bool), lsopi_core::Error> {
            let mut filt = linearizability_sequence(&sys, &smp, None)?;
            let Some(k) = non_involutivity_index(&filt, &smp)? else {
                return Ok((false, false));
            };
            let info = classify(&sys, &mut filt, k, &smp)?;
            let dist = match info.label {
                CaseLabel::IiA | CaseLabel::IiB => {
                    construct_h_case_ii(&sys, &filt, &info, &smp)?.dist
                }
                CaseLabel::IiiC1 | CaseLabel::IiiC2 | CaseLabel::IiiC5DoublePrime => {
                    match construct_h_case_iii(&sys, &mut filt, &info, &smp)? {
                        lsopi_core::lsopi::CaseIiiOutcome::Found { dist, .. } => Some(dist),
                        _ => None,
                    }
                }
                _ => None,
            };
            if let Some(d) = &dist {
                let _ = is_involutive(&d.h, &smp)?;
            }
            Ok((true, dist.is_some()))
        })();
        let t4 = Instant::now();
        if let Ok((c, h)) = probe {
            classified += c as usize;
            with_h += h as usize;
        }
        writeln!(
            log,
            "{} n={} gen={}ms char={}ms({}) clos={}ms({}) probe={}ms({:?})",
            idx,
            sys.dim(),
            (t1 - t0).as_millis(),
            (t2 - t1).as_millis(),
            cres.is_ok(),
            (t3 - t2).as_millis(),
            clres.is_ok(),
            (t4 - t3).as_millis(),
            probe.map(|p| p.0),
        )
        .unwrap();
        log.flush().unwrap();
    }
    writeln!(
        log,
        "TOTAL {}ms skipped={} classified={} with_h={}",
        total.elapsed().as_millis(),
        skipped,
        classified,
        with_h
    )
    .unwrap();
}
