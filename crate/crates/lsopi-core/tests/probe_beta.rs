// temporary probe
use lsopi_core::funlinalg::Sampler;
use lsopi_core::geometry::{ControlAffineSystem, Distribution, VectorField};
use lsopi_core::lsopi::extract_beta_column;
use lsopi_core::symcore::{parse_expr, Vars};

fn rf(vars: &Vars, s: &str) -> lsopi_core::symcore::RatFun {
    parse_expr(s, vars).unwrap().canon().unwrap()
}

fn field(vars: &Vars, comps: &[&str]) -> VectorField {
    VectorField::new(
        vars.clone(),
        comps.iter().map(|s| rf(vars, s)).collect(),
    )
    .unwrap()
}

#[test]
fn probe() {
    let smp = Sampler::default();
    let names = ["x1", "x2", "x3", "x4", "u1_0"];
    let v = Vars::from_strs(&names);
    let p1 = ControlAffineSystem::new(
        "p".to_string(),
        v.clone(),
        field(&v, &["(1 + x2^2)*u1_0", "(1 + x2^2)*x3*u1_0", "(1 + x2^2)*x4*u1_0", "0", "0"]),
        field(&v, &["0", "0", "0", "0", "1"]),
        field(&v, &["0", "0", "0", "1", "0"]),
    )
    .unwrap();
    let h = Distribution::new(
        v.clone(),
        vec![
            VectorField::unit(v.clone(), 4),
            VectorField::unit(v.clone(), 3),
            field(&v, &["x3", "x3^2", "1", "0", "0"]),
        ],
    );
    let (b1, b2) = extract_beta_column(&p1, &h, &smp).unwrap();
    let names: Vec<String> = ["x1", "x2", "x3", "x4", "u1_0"].iter().map(|s| s.to_string()).collect();
    eprintln!("b1 = {:?}", b1.to_display(&names));
    eprintln!("b2 = {:?}", b2.to_display(&names));
}
