use soundfield::gan::net::{Discriminator, Generator};
use soundfield::gan::train::{build_train_batch, generator_fakes, sample_latents, TrainConfig};
use soundfield::gan::TrainConfig as _TC;
use soundfield::nn::SnMode;
use std::time::Instant;

#[test]
#[ignore]
fn time_phases() {
    let cfg = TrainConfig::full(1, 1).unwrap();
    let gen = Generator::<f32>::new(cfg.gen_arch.clone(), 1).unwrap();
    let mut disc = Discriminator::<f32>::new(cfg.disc_arch.clone(), 2).unwrap();

    let t = Instant::now();
    let batch = build_train_batch::<f32>(&cfg, 1, 32).unwrap();
    println!("batch gen (fields+dicts): {:.3} s", t.elapsed().as_secs_f64());

    let z = sample_latents::<f32>(128, 32, 3);
    let t = Instant::now();
    let fake = generator_fakes(&gen, &batch.dicts, &z, 21, 21);
    println!("G forward + project:      {:.3} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (logits, dcache) = disc.forward_batch(&fake.fields, SnMode::Train);
    println!("D forward (32):           {:.3} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let gl = vec![0.01f32; logits.len()];
    let (_dgrads, grad_in) = disc.backward_batch(&dcache, &gl);
    println!("D backward (32):          {:.3} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let grad_coeffs = soundfield::gan::train::fake_field_grad_to_coeffs(&batch.dicts, &grad_in, 4096, 64);
    println!("adjoint projection:       {:.3} s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (_g, _gz) = gen.backward_batch(&fake.cache, &grad_coeffs);
    println!("G backward full:          {:.3} s", t.elapsed().as_secs_f64());
}
