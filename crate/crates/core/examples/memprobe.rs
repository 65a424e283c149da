// scratch: memory/loop probes at bn scale
use std::time::Instant;

fn main() {
    let n = 8 * 128 * 458 * 8usize; // 3.75M f64 = 30 MB
    let x: Vec<f64> = (0..n).map(|i| (i % 83) as f64 / 83.0).collect();

    // probe 1: plain sum
    let t = Instant::now();
    let s: f64 = x.iter().sum();
    println!("plain sum: {:.1} ms [{s:.1}]", t.elapsed().as_secs_f64()*1e3);

    // probe 2: per-channel sums via chunks_exact(8) with stack accumulator
    let t = Instant::now();
    let mut acc = [0.0f64; 8];
    for px in x.chunks_exact(8) {
        for ch in 0..8 { acc[ch] += px[ch]; }
    }
    println!("chunked c-sum: {:.1} ms [{:.1}]", t.elapsed().as_secs_f64()*1e3, acc[0]);

    // probe 3: alloc + zero 30 MB
    let t = Instant::now();
    let z = vec![0.0f64; n];
    println!("alloc+zero: {:.1} ms [{}]", t.elapsed().as_secs_f64()*1e3, z.len());

    // probe 4: write transform out[i] = x[i]*2+1 into fresh vec
    let t = Instant::now();
    let mut out = vec![0.0f64; n];
    for (o, &v) in out.iter_mut().zip(&x) { *o = v * 2.0 + 1.0; }
    println!("transform write: {:.1} ms [{:.1}]", t.elapsed().as_secs_f64()*1e3, out[7]);

    // probe 5: transform into pre-touched vec (second pass)
    let t = Instant::now();
    for (o, &v) in out.iter_mut().zip(&x) { *o = v * 3.0 - 1.0; }
    println!("transform rewrite: {:.1} ms [{:.1}]", t.elapsed().as_secs_f64()*1e3, out[7]);
}
