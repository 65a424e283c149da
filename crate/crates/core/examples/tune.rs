// scratch: end-to-end tuning harness for the synthetic dataset
use std::time::Instant;

use stemclass::experiment::*;
use stemclass::features::{featurize, SeparatorKind, Variant};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let trials: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let simdiff_trials: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(7);

    let dir = std::env::temp_dir().join(format!("stemclass_tune_{seed}"));
    let t0 = Instant::now();
    let specs = default_genre_specs();
    let manifest = if dir.join("manifest.csv").is_file() {
        stemclass::features::DatasetManifest::from_csv(dir.join("manifest.csv")).unwrap()
    } else {
        synth_dataset(&specs, &[15, 14, 11, 10, 9, 7], seed, &dir).unwrap()
    };
    println!("dataset ready in {:.1}s at {}", t0.elapsed().as_secs_f64(), dir.display());

    let t1 = Instant::now();
    let cache = |name: &str, variant: Variant| {
        let path = dir.join(name);
        if path.is_file() {
            stemclass::features::FeatureTensor::load(&path).unwrap()
        } else {
            let f = featurize(&manifest, variant, SeparatorKind::External).unwrap();
            f.tensor.save(&path).unwrap();
            f.tensor
        }
    };
    let stems3 = cache("stems3.ssgt", Variant::Stems3);
    let full = cache("full.ssgt", Variant::MixFull);
    let novox = cache("novox.ssgt", Variant::MixNovox);
    println!("featurized in {:.1}s", t1.elapsed().as_secs_f64());

    if trials > 0 {
        let features = VariantFeatures { stems3: &stems3, full: &full, novox: &novox };
        let t2 = Instant::now();
        let runs = run_experiment(&features, trials, 1000, TrialProtocol::default(), 1).unwrap();
        let summary = summarize(&runs).unwrap();
        println!("{}", summary_text(&summary));
        println!("{} trials in {:.1}s ({:.1}s/trial)", trials, t2.elapsed().as_secs_f64(), t2.elapsed().as_secs_f64() / trials as f64);
    }

    if simdiff_trials > 0 {
        let t3 = Instant::now();
        let report = similar_vs_different(
            &full,
            DEFAULT_SIMILAR_PAIR,
            DEFAULT_DIFFERENT_PAIR,
            simdiff_trials,
            2000,
            TrialProtocol::default(),
        )
        .unwrap();
        println!(
            "similar {:?}: {:.3}  different {:?}: {:.3}  gap {:.3}  ({:.1}s)",
            report.similar_pair,
            report.similar_mean_accuracy,
            report.different_pair,
            report.different_mean_accuracy,
            report.gap(),
            t3.elapsed().as_secs_f64()
        );
        println!("similar accs: {:?}", report.similar_accuracies);
        println!("different accs: {:?}", report.different_accuracies);
    }
}
