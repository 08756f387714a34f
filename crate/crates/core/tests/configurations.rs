use vacua_core::config::{
    config_vacuum_energy, ensemble_average_with, ensemble_sample, sample_hard_sphere, Boundary, DipoleConfiguration, EnsembleOptions,
};
use vacua_core::params::{DipoleSpecies, MediumSpec};

fn species() -> DipoleSpecies {
    DipoleSpecies::new(1e-7, 1e4).unwrap()
}

#[test]
fn position_table_file_round_trip() {
    let c = sample_hard_sphere(12, 0.02, 0.05, &species(), 4).unwrap();
    let path = std::env::temp_dir().join(format!("vacua-positions-{}.txt", std::process::id()));
    c.write(&path).unwrap();
    let back = DipoleConfiguration::read(&path, species()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(back, c);
    assert_eq!(config_vacuum_energy(&back).unwrap(), config_vacuum_energy(&c).unwrap());
}

#[test]
fn ensemble_samples_match_adaptive_energies() {
    let m = MediumSpec::hard_sphere(0.02, 0.05).unwrap();
    let e = ensemble_average_with(16, &m, &species(), 16, 8, &EnsembleOptions::default()).unwrap();
    for i in [0, 7, 15] {
        let c = ensemble_sample(16, &m, &species(), 8, i).unwrap();
        let adaptive = config_vacuum_energy(&c).unwrap().breakdown["interaction"];
        assert!((e.samples[i] / adaptive - 1.0).abs() < 1e-6, "sample {i}: {} vs {adaptive}", e.samples[i]);
    }
    let free = e.mean.breakdown["free_space"];
    let one = config_vacuum_energy(&ensemble_sample(16, &m, &species(), 8, 0).unwrap()).unwrap();
    assert!((one.breakdown["free_space"] / free - 1.0).abs() < 1e-12);
}

#[test]
fn open_boundaries_lose_surface_pairs() {
    // Same positions and volume; dropping images removes the pairs whose
    // nearest image crosses a face, so the interaction energy shrinks.
    let m = MediumSpec::hard_sphere(0.02, 0.05).unwrap();
    let run = |b| ensemble_average_with(32, &m, &species(), 32, 3, &EnsembleOptions { boundary: b, ..Default::default() }).unwrap();
    let periodic = run(Boundary::Periodic);
    let open = run(Boundary::Open);
    let (p, o) = (periodic.mean.breakdown["interaction"], open.mean.breakdown["interaction"]);
    assert!(p < 0.0 && o < 0.0);
    assert!(o > p, "open {o} vs periodic {p}");
}
