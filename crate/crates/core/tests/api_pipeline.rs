mod common;

use scnn::action_pattern::{build_api, ApiBuilder, ApiOptions, Outline};
use scnn::synth::{synth_video, synth_video_with, Background, SynthOptions, VideoKind};

#[test]
fn builder_matches_frame_by_frame_oracle() {
    for (kind, seed) in [(VideoKind::TranslateSquare, 1), (VideoKind::WaveBar, 2), (VideoKind::TranslateSquare, 3)] {
        let seq = synth_video(kind, 10, seed).unwrap();
        let api = build_api(&seq).unwrap();
        assert_eq!(api.image(), &common::oracle_api(&seq), "{kind:?} seed {seed}");
        assert!(api.image().count_ones() > 0);
    }
}

#[test]
fn illumination_scale_is_invisible() {
    let seq = synth_video(VideoKind::WaveBar, 10, 4).unwrap();
    let api = build_api(&seq).unwrap();
    for k in [0.5, 0.7, 0.9] {
        assert_eq!(build_api(&seq.scaled(k)).unwrap().image(), api.image(), "scale {k}");
    }
}

#[test]
fn flat_background_level_is_invisible() {
    let with = |level: f32| SynthOptions {
        background: Background::Uniform(level),
        ..SynthOptions::default()
    };
    let base = build_api(&synth_video_with(VideoKind::TranslateSquare, 10, 0, &with(0.0)).unwrap()).unwrap();
    for level in [0.2, 0.45] {
        let other = build_api(&synth_video_with(VideoKind::TranslateSquare, 10, 0, &with(level)).unwrap()).unwrap();
        assert_eq!(other.image(), base.image(), "level {level}");
    }
}

#[test]
fn static_scene_gives_no_motion_edges() {
    let seq = synth_video(VideoKind::Static, 8, 5).unwrap();
    assert_eq!(build_api(&seq).unwrap().image().count_ones(), 0);
}

#[test]
fn perimeter_outline_is_inside_binarized() {
    let seq = synth_video(VideoKind::TranslateSquare, 10, 6).unwrap();
    let full = build_api(&seq).unwrap();
    let rim = ApiBuilder::new(ApiOptions {
        outline: Outline::Perimeter,
        ..ApiOptions::default()
    })
    .build(&seq)
    .unwrap();
    assert!(rim.image().is_subset_of(full.image()));
}

#[test]
fn result_is_256_square() {
    let seq = synth_video_with(
        VideoKind::WaveBar,
        6,
        7,
        &SynthOptions {
            width: 96,
            height: 64,
            ..SynthOptions::default()
        },
    )
    .unwrap();
    let api = build_api(&seq).unwrap();
    assert_eq!((api.image().width(), api.image().height()), (256, 256));
}
