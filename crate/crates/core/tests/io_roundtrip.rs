use std::fs;

use scnn::action_pattern::{build_api, ApiBuilder};
use scnn::error::Error;
use scnn::eval::predict_proba;
use scnn::io::{load_api, load_dataset, load_frames, save_api, save_frames, Checkpoint, Manifest};
use scnn::scnn::{build_compact, Network};
use scnn::synth::{glyph_dataset, synth_video_with, SynthOptions, VideoKind};
use scnn::train::{train, TrainConfig};

fn small() -> SynthOptions {
    SynthOptions {
        width: 48,
        height: 48,
        ..SynthOptions::default()
    }
}

#[test]
fn frames_survive_disk_up_to_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth_video_with(VideoKind::WaveBar, 5, 3, &small()).unwrap();
    save_frames(dir.path(), &seq).unwrap();
    let back = load_frames(dir.path()).unwrap();
    assert_eq!(back.len(), 5);
    for (a, b) in seq.frames().iter().zip(back.frames()) {
        for (p, q) in a.pixels().iter().zip(b.pixels()) {
            for c in 0..3 {
                assert!((p[c] - q[c]).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
    }
}

#[test]
fn api_files_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let api = build_api(&synth_video_with(VideoKind::TranslateSquare, 8, 1, &small()).unwrap()).unwrap();
    let path = dir.path().join("p.pgm");
    save_api(&path, &api).unwrap();
    assert_eq!(load_api(&path).unwrap().image(), api.image());

    let mut bytes = fs::read(&path).unwrap();
    *bytes.last_mut().unwrap() = 7;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(load_api(&path), Err(Error::Format { .. })));
}

#[test]
fn trained_checkpoint_predicts_identically_after_reload() {
    let data = glyph_dataset(3, 10, 16, 0).unwrap();
    let mut net: Network<f32> = Network::new(build_compact(16, 1, 3).unwrap(), 4).unwrap();
    let cfg = TrainConfig {
        batch_size: 10,
        max_iterations: Some(6),
        ..TrainConfig::default()
    };
    train(&mut net, &data, &cfg).unwrap();
    let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    Checkpoint::new(net, labels.clone()).unwrap().save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.labels, labels);
    let imgs: Vec<_> = data.iter().map(|s| &s.image).collect();
    let reference = Checkpoint::from_bytes(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(
        predict_proba(&loaded.network, &imgs).unwrap(),
        predict_proba(&reference.network, &imgs).unwrap()
    );
}

#[test]
fn checkpoint_rejects_label_mismatch_and_junk() {
    let net: Network<f32> = Network::new(build_compact(8, 1, 2).unwrap(), 0).unwrap();
    assert!(Checkpoint::new(net, vec!["only".into()]).is_err());
    assert!(Checkpoint::from_bytes(b"SCNN\0\0").is_err());
    assert!(Checkpoint::from_bytes(b"nope").is_err());
}

#[test]
fn manifest_mixes_frame_dirs_and_pattern_files() {
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("clip");
    save_frames(&clip, &synth_video_with(VideoKind::WaveBar, 6, 2, &small()).unwrap()).unwrap();
    let api = build_api(&synth_video_with(VideoKind::TranslateSquare, 6, 2, &small()).unwrap()).unwrap();
    save_api(dir.path().join("sq.pgm"), &api).unwrap();
    let list = dir.path().join("set.tsv");
    fs::write(&list, "# comment\nclip\tbar\n\nsq.pgm\tsquare\n").unwrap();

    let m = Manifest::load(&list, None).unwrap();
    assert_eq!(m.labels(), vec!["bar".to_string(), "square".to_string()]);
    let data = load_dataset(&m, &m.labels(), &ApiBuilder::default()).unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!((data[0].label, data[1].label), (0, 1));
    assert_eq!(&data[1].image, api.image());

    let only: Vec<String> = vec!["bar".into()];
    assert!(Manifest::load(&list, Some(&only)).is_err());
    fs::write(&list, "clip\tbar\nclip\tbar\n").unwrap();
    assert!(Manifest::load(&list, None).is_err());
}
