use std::time::Instant;
use vesselsound::data::synth::{corpus_items, CorpusCounts};
use vesselsound::dsp::{featurize, DspConfig};
use vesselsound::models::{build, ModelConfig};
use vesselsound::pipeline::spectrogram_to_input;
use vesselsound::train::{train, TrainConfig};
use vesselsound::ClassTaxonomy;

fn main() {
    let taxonomy = ClassTaxonomy::default();
    let dsp = DspConfig::default();
    let t0 = Instant::now();
    let items = corpus_items(CorpusCounts { train: 70, val: 14, test: 0 }, 7, &taxonomy);
    use rayon::prelude::*;
    let samples: Vec<_> = items
        .par_iter()
        .map(|it| {
            let clip = vesselsound::data::synth::synth_generate(&it.recipe);
            let spec = featurize(&clip, &dsp).unwrap();
            (spectrogram_to_input(&spec, dsp.db_floor), it.recipe.action.index(), it.split)
        })
        .collect();
    println!("featurize 84 clips: {:.2?}", t0.elapsed());

    let train_set: Vec<_> = samples
        .iter()
        .filter(|s| s.2 == vesselsound::data::Split::Train)
        .map(|s| (s.0.clone(), s.1))
        .collect();
    let val_set: Vec<_> = samples
        .iter()
        .filter(|s| s.2 == vesselsound::data::Split::Val)
        .map(|s| (s.0.clone(), s.1))
        .collect();

    let config = ModelConfig::compact();
    let net = build::<f32>(&config.action, 96).unwrap();
    println!("action params: {}", net.count_params());
    let cfg = TrainConfig { epochs: 3, seed: 1, jobs: 0, ..TrainConfig::default() };
    let t1 = Instant::now();
    let (_, history) = train(net, &train_set, &val_set, &cfg).unwrap();
    let dt = t1.elapsed();
    println!("3 epochs x {} train + {} val: {:.2?} ({:.3?}/epoch)", train_set.len(), val_set.len(), dt, dt / 3);
    println!("losses: {:?}", history.epochs.iter().map(|e| (e.train_loss, e.val_loss)).collect::<Vec<_>>());
}
