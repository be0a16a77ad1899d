//! Scratch probe: sensitivity of the trend criteria to artifact-default knobs.

use fedgen::experiment::{run_cell, ExperimentConfig, Protocol};
use fedgen::oracle::PromptKind;

fn mean_acc(cfg: &ExperimentConfig, seeds: &[u64]) -> f64 {
    let mut acc = 0.0;
    for &s in seeds {
        acc += run_cell(cfg, s).unwrap().result.final_accuracy();
    }
    acc / seeds.len() as f64
}

#[test]
#[ignore]
fn probe_knob_grid() {
    let seeds = [0u64, 1, 2, 3, 4];

    // Bayes ceiling estimate: centralized on lots of real data.
    let mut big = ExperimentConfig::default();
    big.protocol = Protocol::Centralized;
    big.world.train_per_class = 2000;
    big.train.server_epochs = 30;
    big.seeds = vec![0];
    println!("centralized 20k real: {:.4}", mean_acc(&big, &[0, 1]));

    for &tpc in &[50usize, 100] {
        for &eps in &[0.25f64, 0.5] {
            for &bs in &[32usize, 64] {
                let mut base = ExperimentConfig::default();
                base.world.train_per_class = tpc;
                base.oracle.fidelity_eps = vec![eps];
                base.train.batch_size = bs;

                let mut fedavg = base.clone();
                fedavg.protocol = Protocol::Fedavg;
                fedavg.partition.beta = 0.01;
                let fa_skew = mean_acc(&fedavg, &seeds);
                fedavg.partition.beta = 1e6;
                let fa_iid = mean_acc(&fedavg, &seeds);

                let mut oneshot = base.clone();
                oneshot.protocol = Protocol::FglOneshot;
                oneshot.partition.beta = 0.01;
                let os = mean_acc(&oneshot, &seeds);

                let mut mr = base.clone();
                mr.train.rounds = 5;
                mr.partition.beta = 0.01;
                mr.protocol = Protocol::FglMultiround;
                let mr_plain = mean_acc(&mr, &seeds);
                mr.protocol = Protocol::FglMultiroundSyn;
                let mr_syn = mean_acc(&mr, &seeds);

                println!(
                    "tpc {tpc:3} eps {eps} bs {bs:2}: fedavg(iid {fa_iid:.3} skew {fa_skew:.3}) oneshot {os:.3} | c6 gap {:+.1} | 5r {mr_plain:.3} 5r-syn {mr_syn:.3} c7b {:+.1}",
                    (os - fa_skew) * 100.0,
                    (mr_syn - mr_plain) * 100.0
                );
            }
        }
    }
}

#[test]
#[ignore]
fn probe_instance_budget_parity() {
    let seeds = [0u64, 1, 2, 3, 4];
    for &tpc in &[100usize, 200, 500] {
        let mut cls = ExperimentConfig::default();
        cls.protocol = Protocol::FglOneshot;
        cls.world.train_per_class = tpc;
        cls.oracle.fidelity_eps = vec![2.0];
        cls.n_per_class_prompt = tpc; // budget parity with instance prompts
        let c = mean_acc(&cls, &seeds);
        let mut inst = cls.clone();
        inst.prompt_kind = PromptKind::InstanceLevel;
        let i = mean_acc(&inst, &seeds);
        println!("tpc {tpc}: class@eps2 {c:.4} instance {i:.4} gap {:+.1} pts", (i - c) * 100.0);
    }
}
