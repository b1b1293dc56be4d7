//! Scratch prototyping for acceptance-experiment hyperparameters.
//! (removed before release)

use gfsdro::datasets::*;
use gfsdro::driver::*;
use gfsdro::eval::*;
use gfsdro::loss::*;
use gfsdro::problem::*;
use gfsdro::rng::RngStream;
use gfsdro::samplers::*;

fn circle_problem(tau: f64, eps: f64) -> RobustProblem {
    RobustProblem::new(
        LossOracle::MlpBce(MlpArchitecture::new(2, vec![4]).unwrap()),
        CostFunction::SquaredEuclideanFixedLabel,
        RobustnessParams::new(tau, eps).unwrap(),
    )
}

fn moons_problem(tau: f64, eps: f64) -> RobustProblem {
    RobustProblem::new(
        LossOracle::MlpBce(MlpArchitecture::new(2, vec![16, 16]).unwrap()),
        CostFunction::SquaredEuclideanFixedLabel,
        RobustnessParams::new(tau, eps).unwrap(),
    )
}

#[test]
#[ignore]
fn proto_circle() {
    let t0 = std::time::Instant::now();
    for seed in 0..5u64 {
        let train_data = gen_biased_circle(200, seed).unwrap();
        let test_data = gen_circle(1000, RngStream::new(seed).child(0x7E57).seed(), false).unwrap();
        let problem = circle_problem(2.5, 0.15);
        let mut outer = OuterLoopConfig::new(
            OuterSchedule::Epochs(40),
            StepsizeSchedule::Constant(0.1),
        );
        outer.record_first_epoch_clouds = true;

        let mut wfr = SamplerConfig::new(SamplerMethod::Wfr);
        wfr.eta = 0.1;
        wfr.t = 30;
        wfr.m = 20;
        wfr.eta_w = 1.0;
        wfr.w_min = 0.01;

        let mut wrm = SamplerConfig::new(SamplerMethod::Wrm);
        wrm.eta = 0.1;
        wrm.t = 30;
        wrm.m = 1;

        let rep_wfr = train(&problem, &train_data, &wfr, &outer, seed).unwrap();
        let rep_wrm = train(&problem, &train_data, &wrm, &outer, seed).unwrap();
        let qf_wfr = quadrant_fraction(&rep_wfr.first_epoch_clouds).unwrap();
        let qf_wrm = quadrant_fraction(&rep_wrm.first_epoch_clouds).unwrap();
        let acc = |rep: &TrainReport| {
            1.0 - misclassification_rate(&problem.loss, &rep.final_theta, &test_data).unwrap()
        };
        println!(
            "seed {seed}: qf wfr={qf_wfr:.4} wrm={qf_wrm:.4} | acc wfr={:.4} wrm={:.4}",
            acc(&rep_wfr),
            acc(&rep_wrm)
        );
    }
    println!("circle proto: {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn proto_moons_inner() {
    let t0 = std::time::Instant::now();
    let seed = 7u64;
    let data = gen_two_moons(200, 0.1, 0.9, seed).unwrap();
    let problem = moons_problem(0.1, 0.01);
    let pre_outer = OuterLoopConfig::new(
        OuterSchedule::Epochs(100),
        StepsizeSchedule::Constant(0.1),
    );
    let pre = saa_train(&problem, &data, &pre_outer, seed).unwrap();
    println!(
        "pretrain final loss {:.4}, train err {:.4}",
        pre.loss_estimates.last().unwrap(),
        misclassification_rate(&problem.loss, &pre.final_theta, &data).unwrap()
    );
    let stream = RngStream::new(seed).child(0xC0DE);
    let mut curves = Vec::new();
    for (name, method, m, eta_w, w_min, l, sigma) in [
        ("wgf", SamplerMethod::WgfUla, 5usize, 0.0, 0.0, 0.0, 0.1),
        ("wfr", SamplerMethod::Wfr, 5, 0.5, 0.05, 0.0, 0.1),
        ("wrm", SamplerMethod::Wrm, 1, 0.0, 0.0, 0.0, 0.1),
        ("rgo", SamplerMethod::Rgo, 5, 0.0, 0.0, 5.0, 0.1),
        ("svgd01", SamplerMethod::Svgd, 5, 0.0, 0.0, 0.0, 0.1),
        ("svgd02", SamplerMethod::Svgd, 5, 0.0, 0.0, 0.0, 0.2),
    ] {
        let mut cfg = SamplerConfig::new(method);
        cfg.eta = 0.01;
        cfg.t = 300;
        cfg.m = m;
        cfg.eta_w = eta_w;
        cfg.w_min = w_min;
        cfg.smoothness_l = l;
        cfg.sigma_init = sigma;
        let r = inner_objective_curve(&problem, &pre.final_theta, &data, &cfg, 1, &stream);
        match r {
            Ok(curve) => {
                let fin = -curve.expected_potential.last().unwrap();
                let start = -curve.expected_potential[0];
                println!("{name}: start E[-V]={start:.4} final={fin:.4}");
                curves.push((name, curve));
            }
            Err(e) => println!("{name}: ERROR {e}"),
        }
    }
    // crossing check
    let wgf_final = curves
        .iter()
        .find(|(n, _)| *n == "wgf")
        .map(|(_, c)| -c.expected_potential.last().unwrap())
        .unwrap_or(f64::NAN);
    if let Some((_, wfr)) = curves.iter().find(|(n, _)| *n == "wfr") {
        let cross = wfr
            .expected_potential
            .iter()
            .position(|v| -v >= wgf_final);
        println!("wgf final {wgf_final:.4}; wfr crosses at {cross:?} (T=300)");
    }
    println!("moons proto: {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn proto_uncertain_ls() {
    let t0 = std::time::Instant::now();
    let seed = 7u64;
    let inst = gen_uncertain_ls(seed);
    let data = inst.train_dataset();
    let problem = RobustProblem::new(
        LossOracle::UncertainLs(inst.system.clone()),
        CostFunction::SquaredEuclidean,
        RobustnessParams::new(0.1, 0.1).unwrap(),
    );
    for r in [1e-3, 3e-3, 1e-2] {
        let outer = OuterLoopConfig::new(
            OuterSchedule::Epochs(10),
            StepsizeSchedule::InverseSqrt(r),
        );
        let mut results = Vec::new();
        for (name, method) in [
            ("saa", None),
            ("wrm", Some(SamplerMethod::Wrm)),
            ("wgf", Some(SamplerMethod::WgfUla)),
            ("wfr", Some(SamplerMethod::Wfr)),
        ] {
            let rep = match method {
                None => saa_train(&problem, &data, &outer, seed),
                Some(m) => {
                    let mut cfg = SamplerConfig::new(m);
                    cfg.eta = 1e-4;
                    cfg.t = 3000;
                    cfg.m = 8;
                    if m == SamplerMethod::Wfr {
                        cfg.eta_w = 0.1;
                        cfg.w_min = 0.05;
                    }
                    train(&problem, &data, &cfg, &outer, seed)
                }
            };
            match rep {
                Ok(rep) => {
                    let mut losses = Vec::new();
                    for delta in [4.0, 6.0, 8.0, 10.0] {
                        let xis = inst.test_xi(delta, 1000, RngStream::new(seed).child(0x7E57).seed());
                        let mut l = 0.0;
                        for xi in &xis {
                            l += problem
                                .loss
                                .value(&rep.final_theta, &LabeledPoint::unlabeled(vec![*xi]))
                                .unwrap();
                        }
                        losses.push(l / 1000.0);
                    }
                    println!("r={r}: {name}: test losses {losses:?}");
                    results.push((name, losses));
                }
                Err(e) => println!("r={r}: {name}: ERROR {e}"),
            }
        }
    }
    println!("uncertain proto: {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn proto_features() {
    let t0 = std::time::Instant::now();
    let seed = 3u64;
    let margin = 5.0;
    let train_data = gen_synthetic_features(2000, 64, 10, margin, seed).unwrap();
    let test_data =
        gen_synthetic_features(1000, 64, 10, margin, RngStream::new(seed).child(0x7E57).seed())
            .unwrap();
    let problem = RobustProblem::new(
        LossOracle::SoftmaxLogistic { feature_dim: 64, classes: 10 },
        CostFunction::SquaredEuclideanFixedLabel,
        RobustnessParams::new(0.05, 0.02).unwrap(),
    );
    let outer = OuterLoopConfig::new(
        OuterSchedule::Epochs(3),
        StepsizeSchedule::Constant(0.02),
    );
    let attack = AttackConfig::default();
    for (name, method) in [
        ("saa", None),
        ("wgf", Some(SamplerMethod::WgfUla)),
        ("wfr", Some(SamplerMethod::Wfr)),
    ] {
        let rep = match method {
            None => saa_train(&problem, &data_ref(&train_data), &outer, seed).unwrap(),
            Some(m) => {
                let mut cfg = SamplerConfig::new(m);
                cfg.eta = 0.01;
                cfg.t = 30;
                cfg.m = 5;
                if m == SamplerMethod::Wfr {
                    cfg.eta_w = 0.5;
                    cfg.w_min = 0.05;
                }
                train(&problem, &data_ref(&train_data), &cfg, &outer, seed).unwrap()
            }
        };
        let mut errs = Vec::new();
        for delta in [0.0, 0.02, 0.04, 0.08] {
            errs.push(
                attacked_error_rate(&problem.loss, &rep.final_theta, &test_data, delta, &attack)
                    .unwrap(),
            );
        }
        println!("{name}: errors at deltas {errs:?}");
    }
    println!("features proto: {:?}", t0.elapsed());
}

fn data_ref(d: &LabeledDataset) -> LabeledDataset {
    d.clone()
}
