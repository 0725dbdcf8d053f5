use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use y4m::Colorspace;

use super::{FrameRate, VideoFrames, MIN_FRAMES};
use crate::error::{Error, Result};
use crate::frame::RgbFrame;
use crate::ingest::manifest::video_id_for;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Decodes a video into RGB frames in presentation order.
///
/// Supported inputs:
/// - `.y4m` (YUV4MPEG2), any 8/10/12-bit planar colorspace;
/// - a directory of `.png`/`.jpg` frames, ordered by file name, with an
///   optional `fps` file holding `num/den`;
/// - anything else is piped through an `ffmpeg` binary when one is on `PATH`.
pub fn decode_video(path: &Path) -> Result<VideoFrames> {
    let video_id = video_id_for(Path::new(path.file_name().unwrap_or(path.as_os_str())));
    let (frames, fps) = if path.is_dir() {
        decode_frame_dir(path)?
    } else if path.extension().and_then(|e| e.to_str()) == Some("y4m") {
        decode_y4m(path)?
    } else {
        decode_with_ffmpeg(path)?
    };
    if frames.len() < MIN_FRAMES {
        return Err(Error::decode(
            path,
            format!("{} decodable frames, need at least {MIN_FRAMES}", frames.len()),
        ));
    }
    VideoFrames::new(video_id, frames, fps).map_err(|e| Error::decode(path, e.to_string()))
}

fn decode_frame_dir(dir: &Path) -> Result<(Vec<RgbFrame>, FrameRate)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::decode(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    let frames = files
        .iter()
        .map(|p| {
            let img = image::open(p).map_err(|e| Error::decode(p, e.to_string()))?.to_rgb8();
            let (w, h) = img.dimensions();
            RgbFrame::new(w as usize, h as usize, img.into_raw())
        })
        .collect::<Result<Vec<_>>>()?;
    let fps = match fs::read_to_string(dir.join("fps")) {
        Ok(s) => parse_rate(s.trim()).ok_or_else(|| Error::decode(dir, format!("bad fps `{}`", s.trim())))?,
        Err(_) => FrameRate::default(),
    };
    Ok((frames, fps))
}

fn parse_rate(s: &str) -> Option<FrameRate> {
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let rate = FrameRate::new(num.trim().parse().ok()?, den.trim().parse().ok()?);
    (rate.num > 0).then_some(rate)
}

fn decode_y4m(path: &Path) -> Result<(Vec<RgbFrame>, FrameRate)> {
    let file = fs::File::open(path).map_err(|e| Error::decode(path, e.to_string()))?;
    let mut dec = y4m::decode(BufReader::new(file)).map_err(|e| Error::decode(path, format!("{e:?}")))?;
    let (w, h) = (dec.get_width(), dec.get_height());
    let cs = dec.get_colorspace();
    let rate = dec.get_framerate();
    let fps = FrameRate::new(rate.num as u32, rate.den as u32);
    let (cw, ch) = chroma_size(cs, w, h);
    let wide = dec.get_bytes_per_sample() == 2;
    let shift = dec.get_bit_depth().saturating_sub(8);
    let mut frames = Vec::new();
    loop {
        match dec.read_frame() {
            Ok(frame) => {
                let plane = |p: &[u8]| -> Vec<u8> {
                    if wide {
                        p.chunks_exact(2)
                            .map(|b| (u16::from_le_bytes([b[0], b[1]]) >> shift).min(255) as u8)
                            .collect()
                    } else {
                        p.to_vec()
                    }
                };
                let y = plane(frame.get_y_plane());
                let (u, v) = if cw == 0 {
                    (Vec::new(), Vec::new())
                } else {
                    (plane(frame.get_u_plane()), plane(frame.get_v_plane()))
                };
                frames.push(yuv_to_rgb(&y, &u, &v, w, h, cw, ch)?);
            }
            Err(y4m::Error::EOF) => break,
            Err(e) => return Err(Error::decode(path, format!("corrupt stream after {} frames: {e:?}", frames.len()))),
        }
    }
    Ok((frames, fps))
}

fn chroma_size(cs: Colorspace, w: usize, h: usize) -> (usize, usize) {
    match cs {
        Colorspace::Cmono | Colorspace::Cmono12 => (0, 0),
        Colorspace::C422 | Colorspace::C422p10 | Colorspace::C422p12 => (w.div_ceil(2), h),
        Colorspace::C444 | Colorspace::C444p10 | Colorspace::C444p12 => (w, h),
        _ => (w.div_ceil(2), h.div_ceil(2)),
    }
}

/// BT.601 limited-range YCbCr to RGB, nearest-neighbour chroma upsampling.
fn yuv_to_rgb(y: &[u8], u: &[u8], v: &[u8], w: usize, h: usize, cw: usize, ch: usize) -> Result<RgbFrame> {
    let mut data = Vec::with_capacity(w * h * 3);
    for row in 0..h {
        for col in 0..w {
            let luma = (y[row * w + col] as f64 - 16.0) * 255.0 / 219.0;
            let (cb, cr) = if cw == 0 {
                (0.0, 0.0)
            } else {
                let ci = (row * ch / h) * cw + col * cw / w;
                (
                    (u[ci] as f64 - 128.0) * 255.0 / 224.0,
                    (v[ci] as f64 - 128.0) * 255.0 / 224.0,
                )
            };
            let r = luma + 1.402 * cr;
            let g = luma - 0.344136 * cb - 0.714136 * cr;
            let b = luma + 1.772 * cb;
            data.extend([r, g, b].map(|c| c.round().clamp(0.0, 255.0) as u8));
        }
    }
    RgbFrame::new(w, h, data)
}

fn decode_with_ffmpeg(path: &Path) -> Result<(Vec<RgbFrame>, FrameRate)> {
    if !path.is_file() {
        return Err(Error::decode(path, "no such file"));
    }
    let probe = Command::new("ffprobe")
        .args(["-v", "error", "-select_streams", "v:0", "-show_entries", "stream=width,height,avg_frame_rate", "-of", "csv=p=0"])
        .arg(path)
        .output()
        .map_err(|_| {
            Error::decode(path, "unsupported container and no ffprobe/ffmpeg on PATH; convert to .y4m or a frame directory")
        })?;
    if !probe.status.success() {
        return Err(Error::decode(path, String::from_utf8_lossy(&probe.stderr).trim().to_string()));
    }
    let info = String::from_utf8_lossy(&probe.stdout);
    let fields: Vec<&str> = info.trim().split(',').collect();
    let (w, h) = match (fields.first().and_then(|s| s.parse::<usize>().ok()), fields.get(1).and_then(|s| s.parse::<usize>().ok())) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(Error::decode(path, format!("cannot read stream geometry from `{}`", info.trim()))),
    };
    let fps = fields.get(2).and_then(|s| parse_rate(s)).unwrap_or_default();
    let mut child = Command::new("ffmpeg")
        .args(["-v", "error", "-i"])
        .arg(path)
        .args(["-f", "rawvideo", "-pix_fmt", "rgb24", "-vsync", "passthrough", "-"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::decode(path, format!("cannot run ffmpeg: {e}")))?;
    let mut raw = Vec::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_end(&mut raw)
        .map_err(|e| Error::decode(path, e.to_string()))?;
    let out = child.wait_with_output().map_err(|e| Error::decode(path, e.to_string()))?;
    if !out.status.success() {
        return Err(Error::decode(path, String::from_utf8_lossy(&out.stderr).trim().to_string()));
    }
    let size = w * h * 3;
    let frames = raw
        .chunks_exact(size)
        .map(|c| RgbFrame::new(w, h, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, fps))
}

/// Writes frames as a 4:4:4 BT.601 limited-range `.y4m` file. Lossy: the
/// RGB to YCbCr round trip rounds.
pub fn encode_y4m(path: &Path, video: &VideoFrames) -> Result<()> {
    let file = fs::File::create(path)?;
    let (w, h) = (video.width(), video.height());
    let fps = video.fps();
    let mut enc = y4m::encode(w, h, y4m::Ratio::new(fps.num as usize, fps.den as usize))
        .with_colorspace(Colorspace::C444)
        .write_header(BufWriter::new(file))
        .map_err(|e| Error::decode(path, format!("{e:?}")))?;
    for f in video.frames() {
        let mut planes = [Vec::with_capacity(w * h), Vec::with_capacity(w * h), Vec::with_capacity(w * h)];
        for [r, g, b] in f.pixels() {
            let (r, g, b) = (r as f64, g as f64, b as f64);
            let y = 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0;
            let cb = 128.0 + (-37.797 * r - 74.203 * g + 112.0 * b) / 255.0;
            let cr = 128.0 + (112.0 * r - 93.786 * g - 18.214 * b) / 255.0;
            for (plane, value) in planes.iter_mut().zip([y, cb, cr]) {
                plane.push(value.round().clamp(0.0, 255.0) as u8);
            }
        }
        enc.write_frame(&y4m::Frame::new([&planes[0], &planes[1], &planes[2]], None))
            .map_err(|e| Error::decode(path, format!("{e:?}")))?;
    }
    Ok(())
}

/// Writes frames losslessly as `frame_00001.png`, ... plus an `fps` file.
pub fn write_frame_dir(dir: &Path, video: &VideoFrames) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in video.frames().iter().enumerate() {
        let img = image::RgbImage::from_raw(f.width() as u32, f.height() as u32, f.as_raw().to_vec())
            .expect("frame buffer matches its dimensions");
        let p = dir.join(format!("frame_{:05}.png", i + 1));
        img.save(&p).map_err(|e| Error::decode(&p, e.to_string()))?;
    }
    let fps = video.fps();
    fs::File::create(dir.join("fps"))?.write_all(format!("{}/{}\n", fps.num, fps.den).as_bytes())?;
    Ok(())
}
