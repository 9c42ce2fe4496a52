//! Build an action pattern image from a synthetic clip and write the
//! intermediate stages next to it.
//!
//!     cargo run --example build_api -- /tmp/api

use std::path::PathBuf;

use scnn::action_pattern::ApiBuilder;
use scnn::io::{save_api, save_frames, save_gray};
use scnn::synth::{synth_video, VideoKind};

fn main() -> scnn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "api_demo".into()));
    let clip = synth_video(VideoKind::WaveBar, 16, 3)?;
    save_frames(out.join("frames"), &clip)?;

    let (api, trace) = ApiBuilder::default().build_traced(&clip)?;
    save_gray(out.join("background.pgm"), &trace.background)?;
    save_api(out.join("pattern.pgm"), &api)?;

    let img = api.image();
    println!("frames used: {:?}", trace.frames_used);
    println!(
        "pattern {}x{}, {} edge pixels -> {}",
        img.width(),
        img.height(),
        img.count_ones(),
        out.display()
    );
    Ok(())
}
