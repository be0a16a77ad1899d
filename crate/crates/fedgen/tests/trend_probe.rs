//! Scratch probe for the statistical trend criteria (run with --ignored).

use fedgen::experiment::{run_cell, ExperimentConfig, Protocol};
use fedgen::oracle::PromptKind;

fn base() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn mean_acc(cfg: &ExperimentConfig, seeds: &[u64]) -> f64 {
    let mut acc = 0.0;
    for &s in seeds {
        acc += run_cell(cfg, s).unwrap().result.final_accuracy();
    }
    acc / seeds.len() as f64
}

#[test]
#[ignore]
fn probe_trends() {
    let seeds = [0u64, 1, 2, 3, 4];

    // Criterion 6: fedavg at beta 0.01 vs fgl oneshot.
    let mut fedavg = base();
    fedavg.protocol = Protocol::Fedavg;
    fedavg.partition.beta = 0.01;
    let t0 = std::time::Instant::now();
    let fa = mean_acc(&fedavg, &seeds);
    println!("fedavg 30r beta0.01: {fa:.4}  ({:?})", t0.elapsed());

    let mut oneshot = base();
    oneshot.protocol = Protocol::FglOneshot;
    oneshot.partition.beta = 0.01;
    let t0 = std::time::Instant::now();
    let os = mean_acc(&oneshot, &seeds);
    println!("fgl_oneshot beta0.01: {os:.4}  gap {:.1} pts ({:?})", (os - fa) * 100.0, t0.elapsed());

    // Centralized on same synthetic budget comparison target.
    let mut central = base();
    central.protocol = Protocol::Centralized;
    let ce = mean_acc(&central, &seeds);
    println!("centralized(real 1000): {ce:.4}");

    // FedAvg IID direction check.
    let mut fedavg_iid = base();
    fedavg_iid.protocol = Protocol::Fedavg;
    fedavg_iid.partition.beta = 1e6;
    let fi = mean_acc(&fedavg_iid, &seeds);
    println!("fedavg 30r beta1e6: {fi:.4}  (iid-vs-skew gap {:.1})", (fi - fa) * 100.0);

    // Criterion 7: multiround.
    let mut mr = base();
    mr.protocol = Protocol::FglMultiround;
    mr.partition.beta = 1e6;
    mr.train.rounds = 5;
    let mr_iid = mean_acc(&mr, &seeds);
    let mut os_iid = base();
    os_iid.protocol = Protocol::FglOneshot;
    os_iid.partition.beta = 1e6;
    let os_i = mean_acc(&os_iid, &seeds);
    println!("5-round iid: {mr_iid:.4} vs oneshot iid {os_i:.4} (need >= -0.5 pts)");

    let mut mr_skew = base();
    mr_skew.protocol = Protocol::FglMultiround;
    mr_skew.partition.beta = 0.01;
    mr_skew.train.rounds = 5;
    let plain = mean_acc(&mr_skew, &seeds);
    mr_skew.protocol = Protocol::FglMultiroundSyn;
    let syn = mean_acc(&mr_skew, &seeds);
    println!("beta0.01 5-round: {plain:.4}  5-round-syn: {syn:.4}  gap {:.1} pts (need >= 2)", (syn - plain) * 100.0);

    // Criterion 8: volume trend.
    let mut vol = base();
    vol.protocol = Protocol::FglOneshot;
    let mut curve = Vec::new();
    for n in [50usize, 100, 200, 500, 1000] {
        vol.n_per_class_prompt = n;
        curve.push((n, mean_acc(&vol, &seeds)));
    }
    println!("volume curve: {curve:?}");

    // Criterion 9: instance vs class at eps 2.
    let mut cls = base();
    cls.protocol = Protocol::FglOneshot;
    cls.oracle.fidelity_eps = vec![2.0];
    let c = mean_acc(&cls, &seeds);
    let mut inst = cls.clone();
    inst.prompt_kind = PromptKind::InstanceLevel;
    let i = mean_acc(&inst, &seeds);
    println!("eps2 class: {c:.4} instance: {i:.4} gap {:.1} pts (need >= 3)", (i - c) * 100.0);

    // Criterion 10: fidelity failure.
    let mut eps = base();
    eps.protocol = Protocol::FglOneshot;
    let mut eps_curve = Vec::new();
    for e in [0.0f64, 1.0, 2.0, 4.0] {
        eps.oracle.fidelity_eps = vec![e];
        eps_curve.push((e, mean_acc(&eps, &seeds)));
    }
    println!("eps curve: {eps_curve:?}");
}
