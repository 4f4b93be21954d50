use std::time::Instant;

use racetrack_fe::{make_grid, KernelMatrix, ModelParams};

fn main() {
    let grid = make_grid(255, 1.0).unwrap();
    let k = KernelMatrix::build(&grid, &ModelParams::default());
    let x: Vec<f64> = (0..255).map(|i| 1.0 + (i as f64).sin() * 0.1).collect();
    let mut scratch = Vec::with_capacity(510);
    let mut out = vec![0.0; 255];
    let reps = 20000;
    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..reps {
        k.convolve_into(&x, &mut scratch, &mut out);
        acc += out[3];
    }
    println!("{:.2} us/convolve ({acc})", t.elapsed().as_secs_f64() * 1e6 / reps as f64);
}
