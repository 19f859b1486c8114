use telepose_cli::lidar_bench::{median_rmse_t, run_lidar_bench, LidarMethod};
use telepose_core::pipeline::PipelineConfig;
use telepose_core::scenarios::{Scenario, ScenarioKind};

fn main() {
    let started = std::time::Instant::now();
    let mut scenario = Scenario::new(ScenarioKind::Rotation, 6.0, 0);
    scenario.sweep_deg = 120.0;
    scenario.noise.range_sigma = 0.01;
    scenario.occluder = Some(scenario.default_occluder());
    let seeds: Vec<u64> = (0..10).collect();
    let cfg = PipelineConfig::default();
    let reports = run_lidar_bench(&scenario, &LidarMethod::all_methods(), &seeds, &cfg).unwrap();
    for m in LidarMethod::all_methods() {
        let med = median_rmse_t(&reports, m);
        let matches: Vec<u64> = reports.iter().filter(|r| r.method == m.label()).map(|r| r.valid_matches).collect();
        let med_matches = { let mut v = matches.clone(); v.sort(); v[v.len()/2] };
        println!("{:8} median rmse_t {:.4} m   median matches {}", m.label(), med, med_matches);
    }
    let per_seed: Vec<(u64, f64, f64, f64, f64)> = seeds.iter().map(|&s| {
        let get = |m: LidarMethod| reports.iter().find(|r| r.seed == s && r.method == m.label()).unwrap().rmse_t;
        (s, get(LidarMethod::All), get(LidarMethod::Comb), get(LidarMethod::Backend), get(LidarMethod::Odom))
    }).collect();
    for (s, all, comb, backend, odom) in per_seed {
        println!("seed {s}: all {all:.4} comb {comb:.4} backend {backend:.4} odom {odom:.4}");
    }
    println!("elapsed {:.1} s", started.elapsed().as_secs_f64());
}
