//! moons pretraining strength diagnostics (scratch)
use gfsdro::datasets::*;
use gfsdro::driver::*;
use gfsdro::eval::*;
use gfsdro::loss::*;
use gfsdro::problem::*;
use gfsdro::rng::RngStream;
use gfsdro::samplers::*;

fn moons_problem() -> RobustProblem {
    RobustProblem::new(
        LossOracle::MlpBce(MlpArchitecture::new(2, vec![16, 16]).unwrap()),
        CostFunction::SquaredEuclideanFixedLabel,
        RobustnessParams::new(0.1, 0.01).unwrap(),
    )
}

#[test]
#[ignore]
fn pretrain_light() {
    let seed = 7u64;
    let data = gen_two_moons(200, 0.1, 0.9, seed).unwrap();
    let problem = moons_problem();
    for (epochs, r, radius) in [
        (2usize, 0.1f64, None::<f64>),
        (3, 0.1, None),
        (5, 0.1, None),
        (30, 0.1, Some(3.0)),
        (30, 0.1, Some(4.0)),
    ] {
        let mut pre_outer = OuterLoopConfig::new(
            OuterSchedule::Epochs(epochs),
            StepsizeSchedule::Constant(r),
        );
        if let Some(rad) = radius {
            pre_outer.projection = Projection::L2Ball(rad);
        }
        let pre = saa_train(&problem, &data, &pre_outer, seed).unwrap();
        let train_err = misclassification_rate(&problem.loss, &pre.final_theta, &data).unwrap();
        let loss = pre.loss_estimates.last().unwrap();
        print!("epochs={epochs} r={r} ball={radius:?}: loss={loss:.4} err={train_err:.4} | ");
        let stream = RngStream::new(seed).child(0xC0DE);
        for (name, method, m, eta_w, w_min, l) in [
            ("wgf", SamplerMethod::WgfUla, 5usize, 0.0f64, 0.0f64, 0.0f64),
            ("wfr", SamplerMethod::Wfr, 5, 0.5, 0.05, 0.0),
            ("wrm", SamplerMethod::Wrm, 1, 0.0, 0.0, 0.0),
            ("rgo", SamplerMethod::Rgo, 5, 0.0, 0.0, 5.0),
        ] {
            let mut cfg = SamplerConfig::new(method);
            cfg.eta = 0.01;
            cfg.t = 300;
            cfg.m = m;
            cfg.eta_w = eta_w;
            cfg.w_min = w_min;
            cfg.smoothness_l = l;
            match inner_objective_curve(&problem, &pre.final_theta, &data, &cfg, 10, &stream) {
                Ok(curve) => {
                    let fin = -curve.expected_potential.last().unwrap();
                    print!("{name}={fin:.3} ");
                }
                Err(e) => {
                    let msg = format!("{e}");
                    print!("{name}=ERR({}) ", &msg[..msg.len().min(40)]);
                }
            }
        }
        println!();
    }
}

#[test]
#[ignore]
fn pretrain_heavy() {
    for seed in [7u64, 11, 42] {
        let data = gen_two_moons(200, 0.1, 0.9, seed).unwrap();
        let problem = moons_problem();
        for (epochs, r) in [(20usize, 0.1f64), (50, 0.1)] {
            let pre_outer = OuterLoopConfig::new(
                OuterSchedule::Epochs(epochs),
                StepsizeSchedule::Constant(r),
            );
            let pre = saa_train(&problem, &data, &pre_outer, seed).unwrap();
            let train_err =
                misclassification_rate(&problem.loss, &pre.final_theta, &data).unwrap();
            print!("seed={seed} epochs={epochs}: err={train_err:.3} | ");
            let stream = RngStream::new(seed).child(0xC0DE);
            let mut wgf_curve: Vec<f64> = vec![];
            let mut wfr_curve: Vec<f64> = vec![];
            for (name, method, m, eta_w, w_min, l) in [
                ("wgf", SamplerMethod::WgfUla, 5usize, 0.0f64, 0.0f64, 0.0f64),
                ("wfr", SamplerMethod::Wfr, 5, 0.5, 0.05, 0.0),
                ("wrm", SamplerMethod::Wrm, 1, 0.0, 0.0, 0.0),
                ("rgo", SamplerMethod::Rgo, 5, 0.0, 0.0, 5.0),
                ("svgd1", SamplerMethod::Svgd, 5, 0.0, 0.0, 0.0),
            ] {
                let mut cfg = SamplerConfig::new(method);
                cfg.eta = 0.01;
                cfg.t = 300;
                cfg.m = m;
                cfg.eta_w = eta_w;
                cfg.w_min = w_min;
                cfg.smoothness_l = l;
                match inner_objective_curve(&problem, &pre.final_theta, &data, &cfg, 1, &stream) {
                    Ok(curve) => {
                        let fin = -curve.expected_potential.last().unwrap();
                        print!("{name}={fin:.3} ");
                        if name == "wgf" {
                            wgf_curve = curve.expected_potential.clone();
                        }
                        if name == "wfr" {
                            wfr_curve = curve.expected_potential.clone();
                        }
                    }
                    Err(e) => {
                        let msg = format!("{e}");
                        print!("{name}=ERR({}) ", &msg[..msg.len().min(30)]);
                    }
                }
            }
            if !wgf_curve.is_empty() && !wfr_curve.is_empty() {
                let wgf_final = -wgf_curve.last().unwrap();
                let cross = wfr_curve.iter().position(|v| -v >= wgf_final);
                print!("| wfr crosses wgf-final at {cross:?}");
            }
            println!();
        }
    }
}
