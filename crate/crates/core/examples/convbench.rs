// scratch: train_step wall-time breakdown
use std::time::Instant;
use stemclass::nn::*;

fn main() {
    let (h, w, c) = (128usize, 458usize, 3usize);
    let batch = 8;
    let x = FeatureMap::from_vec(
        (0..batch * h * w * c).map(|i| (i % 89) as f64 / 89.0).collect(),
        batch, h, w, c,
    );
    let labels: Vec<u32> = (0..batch as u32).map(|i| i % 6).collect();
    let weights = ClassWeights::uniform(6);

    for variant in [ModelVariant::Conv2dStems3, ModelVariant::Conv2dFull, ModelVariant::DwconvStems3] {
        let input = if variant.in_channels() == 1 {
            FeatureMap::from_vec(x.data().iter().step_by(3).cloned().collect(), batch, h, w, 1)
        } else {
            x.clone()
        };
        let mut model = build_model(ModelConfig::for_variant(variant, 6), h, w, 1).unwrap();
        let mut adam = Adam::new(1e-3);
        // warmup
        train_step(&mut model, &mut adam, &input, &labels, &weights).unwrap();
        let t = Instant::now();
        let reps = 3;
        for _ in 0..reps {
            train_step(&mut model, &mut adam, &input, &labels, &weights).unwrap();
        }
        let per_batch = t.elapsed().as_secs_f64() / reps as f64;
        println!("{}: {:.0} ms/batch of {batch} -> {:.1} ms/sample", variant.id(), per_batch * 1e3, per_batch * 1e3 / batch as f64);

        let t = Instant::now();
        for _ in 0..reps {
            let _ = model.forward(&input, false).unwrap();
        }
        println!("  eval forward: {:.0} ms/batch", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    }
}
