// scratch: raw conv kernel throughput
use std::time::Instant;
use stemclass::nn::*;

fn main() {
    for (c_in, c_out, reps) in [(3usize, 8usize, 30u32), (1, 8, 30), (8, 16, 10)] {
        let (h, w) = (128usize, 458usize);
        let input = FeatureMap::from_vec(
            (0..h * w * c_in).map(|i| (i % 97) as f64 / 97.0 - 0.5).collect(), 1, h, w, c_in);
        let mut kernel = ConvKernel::zeros(3, 3, c_in, c_out);
        for (i, v) in kernel.weights.iter_mut().enumerate() { *v = ((i % 13) as f64 - 6.0) / 13.0; }
        let macs = (h * w * c_out * 9 * c_in) as f64;
        let mut sink = 0.0;
        let t = Instant::now();
        for _ in 0..reps { sink += conv2d(&input, &kernel).unwrap().data()[1]; }
        let fwd = t.elapsed().as_secs_f64() / reps as f64;
        let grad = FeatureMap::from_vec(vec![0.5; h * w * c_out], 1, h, w, c_out);
        let t = Instant::now();
        for _ in 0..reps { sink += conv2d_backward(&input, &kernel, &grad).unwrap().0.data()[1]; }
        let bwd = t.elapsed().as_secs_f64() / reps as f64;
        println!("conv {c_in}->{c_out}: fwd {:.1} ms ({:.2} GMAC/s) bwd {:.1} ms ({:.2} GMAC/s) [{sink:.2}]",
            fwd*1e3, macs/fwd/1e9, bwd*1e3, 2.0*macs/bwd/1e9);
    }
}
