//! Central finite-difference checks of the tape's backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};

/// Builds an output from input variables on a tape.
pub type Build = dyn Fn(&mut Tape, &[Var]) -> Var + Send + Sync;
/// Draws random inputs for one trial.
pub type Make = dyn Fn(&mut ChaCha8Rng) -> Vec<Tensor> + Send + Sync;

/// Step used for central differences.
pub const STEP: f32 = 1e-3;

/// Central-difference check of `build` w.r.t. every input. Returns the worst
/// norm-wise relative error across inputs. Non-scalar outputs are reduced by a
/// fixed random projection computed in f64.
pub fn gradcheck(build: &Build, inputs: &[Tensor], seed: u64) -> f64 {
    let h = STEP;
    let eval = |ins: &[Tensor], proj: &[f64]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.constant(t)).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).iter().zip(proj).map(|(a, b)| *a as f64 * b).sum()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t)).collect();
    let out = build(&mut tape, &vars);
    let n_out = tape.value(out).len();
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let proj: Vec<f64> = (0..n_out).map(|_| r.random_range(-1.0..1.0)).collect();
    let flat = tape.reshape(out, &[1, n_out]).expect("flatten");
    let pt = Tensor::new([n_out, 1], proj.iter().map(|&v| v as f32).collect()).expect("projection");
    let pv = tape.constant(&pt);
    let loss = tape.linear(flat, pv, None).expect("projection");
    tape.backward(loss).expect("scalar loss");
    // the projection is rounded to f32 on the tape; use the same values here
    let proj: Vec<f64> = pt.data().iter().map(|&v| v as f64).collect();

    let mut worst = 0.0f64;
    for (k, var) in vars.iter().enumerate() {
        let analytic = tape.grad(*var).map(<[f32]>::to_vec).unwrap_or(vec![0.0; inputs[k].numel()]);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..inputs[k].numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let fd = (eval(&plus, &proj) - eval(&minus, &proj)) / (2.0 * h as f64);
            num += (fd - analytic[i] as f64).powi(2);
            den += (analytic[i] as f64).powi(2);
        }
        let rel = num.sqrt() / den.sqrt().max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Uniform values with magnitude at least `margin`, keeping finite differences
/// away from kinks at zero.
pub fn away_from_zero(shape: &[usize], margin: f32, r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f32 = r.random_range(margin..1.0);
            if r.random_bool(0.5) { v } else { -v }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// One differentiable op with an input generator.
pub struct Case {
    pub name: String,
    pub build: Box<Build>,
    pub make: Box<Make>,
}

impl Case {
    fn new(name: impl Into<String>, build: impl Fn(&mut Tape, &[Var]) -> Var + Send + Sync + 'static, make: impl Fn(&mut ChaCha8Rng) -> Vec<Tensor> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), build: Box::new(build), make: Box::new(make) }
    }

    /// Worst relative error over `seeds` random trials.
    pub fn worst_error(&self, seeds: u64) -> f64 {
        (0..seeds)
            .map(|seed| {
                let mut r = ChaCha8Rng::seed_from_u64(1000 + seed);
                gradcheck(&*self.build, &(self.make)(&mut r), seed)
            })
            .fold(0.0, f64::max)
    }
}

/// Every differentiable op on the tape.
pub fn cases() -> Vec<Case> {
    let mut out = vec![Case::new(
        "linear",
        |t, v| t.linear(v[0], v[1], Some(v[2])).unwrap(),
        |r| vec![Tensor::randn([3, 4], r), Tensor::randn([4, 5], r), Tensor::randn([5], r)],
    )];
    for (stride, pad) in [(1, 1), (2, 1)] {
        out.push(Case::new(
            format!("conv2d s{stride} p{pad}"),
            move |t, v| t.conv2d(v[0], v[1], Some(v[2]), stride, pad).unwrap(),
            |r| vec![Tensor::randn([2, 2, 5, 5], r), Tensor::randn([3, 2, 3, 3], r), Tensor::randn([3], r)],
        ));
    }
    for (stride, pad, k) in [(2, 1, 4), (1, 1, 3)] {
        out.push(Case::new(
            format!("conv_transpose2d s{stride} p{pad} k{k}"),
            move |t, v| t.conv_transpose2d(v[0], v[1], Some(v[2]), stride, pad).unwrap(),
            move |r| vec![Tensor::randn([2, 3, 3, 3], r), Tensor::randn([3, 2, k, k], r), Tensor::randn([2], r)],
        ));
    }
    out.extend([
        Case::new("leaky_relu", |t, v| t.leaky_relu(v[0], 0.2), |r| vec![away_from_zero(&[3, 5], 0.01, r)]),
        Case::new("relu", |t, v| t.relu(v[0]), |r| vec![away_from_zero(&[3, 5], 0.01, r)]),
        Case::new("softplus", |t, v| t.softplus(v[0]), |r| vec![Tensor::uniform([3, 5], -6.0, 6.0, r)]),
        Case::new("tanh", |t, v| t.tanh(v[0]), |r| vec![Tensor::randn([3, 5], r)]),
        Case::new("add", |t, v| t.add(v[0], v[1]).unwrap(), |r| vec![Tensor::randn([4], r), Tensor::randn([4], r)]),
        Case::new("sub", |t, v| t.sub(v[0], v[1]).unwrap(), |r| vec![Tensor::randn([4], r), Tensor::randn([4], r)]),
        Case::new("scale", |t, v| t.scale(v[0], -1.7), |r| vec![Tensor::randn([4], r)]),
        Case::new("reshape", |t, v| t.reshape(v[0], &[2, 3]).unwrap(), |r| vec![Tensor::randn([6], r)]),
        Case::new("sum", |t, v| t.sum(v[0]), |r| vec![Tensor::randn([2, 3], r)]),
        Case::new("sum_squares", |t, v| t.sum_squares(v[0]), |r| vec![Tensor::randn([2, 3], r)]),
        Case::new("l2", |t, v| t.l2(v[0], v[1]).unwrap(), |r| vec![Tensor::randn([5], r), Tensor::randn([5], r)]),
        Case::new("mse", |t, v| t.mse(v[0], v[1]).unwrap(), |r| vec![Tensor::randn([2, 3], r), Tensor::randn([2, 3], r)]),
        Case::new("l1", |t, v| t.l1(v[0], v[1]).unwrap(), |r| {
            // keep a - b away from the kink at zero
            let b = Tensor::randn([2, 3], r);
            let gap = away_from_zero(&[2, 3], 0.01, r);
            let a = Tensor::new([2, 3], b.data().iter().zip(gap.data()).map(|(x, y)| x + y).collect()).unwrap();
            vec![a, b]
        }),
    ]);
    out
}
