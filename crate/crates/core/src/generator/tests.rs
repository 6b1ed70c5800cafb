use super::*;
use crate::scene::{make_dataset, ClassInventory, DatasetConfig};

fn gen() -> GeneratorNet {
    GeneratorNet::standard(32, 4, "test", 1).unwrap()
}

fn latents(n: usize, seed: u64) -> Tensor {
    let z: Vec<f32> = crate::scene::sample_latents(n, 32, seed).concat();
    Tensor::new(vec![n, 32], z).unwrap()
}

#[test]
fn shapes_table() {
    let g = gen();
    let s = g.shapes();
    assert_eq!(s[0], vec![32]);
    assert_eq!(s[1], vec![64, 4, 4]);
    assert_eq!(s[4], vec![32, 8, 8]);
    assert_eq!(s[6], vec![3, 32, 32]);
    let z = latents(3, 0);
    for i in 1..6 {
        let r = g.forward_layers(&z, i).unwrap();
        assert_eq!(r.value.shape()[1..], s[i][..]);
    }
    assert!(g.forward_layers(&z, 0).is_err());
    assert!(g.forward_layers(&z, 6).is_err());
}

#[test]
fn zero_weights_give_zero_image() {
    let mut g = gen();
    for p in g.network_mut().params_mut() {
        p.data_mut().fill(0.0);
    }
    let y = g.forward(&latents(2, 1)).unwrap();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn rejects_wrong_latent_and_activation_shapes() {
    let g = gen();
    assert!(g.forward(&Tensor::zeros([1, 31])).is_err());
    let bad = LayerActivation { index: 4, value: Tensor::zeros([1, 64, 8, 8]) };
    assert!(g.forward_from(&bad).is_err());
}

#[test]
fn off_manifold_activation_still_gives_valid_image() {
    let g = gen();
    let mut r = g.forward_layers(&latents(1, 2), 4).unwrap();
    r.value.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = if i % 2 == 0 { 50.0 } else { -50.0 });
    let y = g.forward_from(&r).unwrap();
    assert!(y.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    let zero = LayerActivation { index: 4, value: Tensor::zeros([1, 32, 8, 8]) };
    assert_eq!(g.forward_from(&zero).unwrap(), g.forward_from(&zero).unwrap());
}

#[test]
fn save_load_round_trip() {
    let g = gen();
    let bytes = g.to_bytes().unwrap();
    let back = GeneratorNet::from_bytes(&bytes).unwrap();
    assert_eq!(back, g);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    assert!(GeneratorNet::from_bytes(&bytes[..bytes.len() / 2]).is_err());
}

#[test]
fn one_distill_step_is_finite_and_deterministic() {
    let inv = ClassInventory::default();
    let data = make_dataset(&DatasetConfig { n: 16, seed: 0, canvas: 32, withheld: None }, &inv).unwrap();
    let set = TrainingSet::from_samples(&data).unwrap();
    let cfg = TrainConfig { steps: 1, batch: 4, ..TrainConfig::default() };
    let mut a = gen();
    let mut b = gen();
    let ra = train(&mut a, &set, &cfg).unwrap();
    let rb = train(&mut b, &set, &cfg).unwrap();
    assert!(ra.losses[0].is_finite());
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_ne!(a, gen());
    assert!(train(&mut a, &set, &TrainConfig { steps: 0, ..cfg }).is_err());
}

#[test]
fn adversarial_steps_run() {
    let inv = ClassInventory::default();
    let data = make_dataset(&DatasetConfig { n: 16, seed: 0, canvas: 32, withheld: None }, &inv).unwrap();
    let set = TrainingSet::from_samples(&data).unwrap();
    let cfg = TrainConfig { mode: TrainMode::Adversarial, steps: 3, batch: 4, ..TrainConfig::default() };
    let mut g = gen();
    let r = train(&mut g, &set, &cfg).unwrap();
    assert_eq!(r.losses.len(), 3);
    assert!(r.losses.iter().all(|l| l.is_finite()));
}

#[test]
fn generate_single_image_matches_batch() {
    let g = gen();
    let z = latents(2, 5);
    let batch = g.forward(&z).unwrap();
    let one = g.generate(&z.data()[32..]).unwrap();
    assert_eq!(one.tensor().shape(), &[3, 32, 32]);
    assert_eq!(one.tensor().data(), batch.item(1).unwrap().data());
}
