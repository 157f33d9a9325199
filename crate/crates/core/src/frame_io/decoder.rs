use std::ffi::OsString;
use std::io::{BufReader, ErrorKind, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Stdio};

use super::{source_label, unreadable, Frame, FrameError, FrameSpec, Result, VideoMeta};

/// Locations of the external decoder and prober.
///
/// Defaults to `ffmpeg` / `ffprobe` on `PATH`, overridable through the
/// `SCENEKIT_FFMPEG` and `SCENEKIT_FFPROBE` environment variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoderConfig {
    pub ffmpeg: PathBuf,
    pub ffprobe: PathBuf,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        let pick = |var: &str, fallback: &str| {
            std::env::var_os(var)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(fallback))
        };
        DecoderConfig {
            ffmpeg: pick("SCENEKIT_FFMPEG", "ffmpeg"),
            ffprobe: pick("SCENEKIT_FFPROBE", "ffprobe"),
        }
    }
}

/// A probed, decodable file.
#[derive(Clone, Debug)]
pub struct DecodedVideo {
    path: PathBuf,
    spec: FrameSpec,
    meta: VideoMeta,
    config: DecoderConfig,
}

impl DecodedVideo {
    pub fn probe(path: &Path, spec: &FrameSpec, config: &DecoderConfig) -> Result<Self> {
        let output = Command::new(&config.ffprobe)
            .args(["-v", "error", "-select_streams", "v:0"])
            .args(["-show_entries", "format=duration:stream=r_frame_rate"])
            .args(["-of", "default=noprint_wrappers=1"])
            .arg(path)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| unreadable(path, format!("failed to run prober: {e}")))?;
        if !output.status.success() {
            return Err(unreadable(
                path,
                format!(
                    "prober exited with {}: {}",
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                ),
            ));
        }
        let (duration, source_fps) = parse_probe(&String::from_utf8_lossy(&output.stdout));
        let duration = match duration {
            Some(d) if d.is_finite() && d > 0.0 => d,
            _ => return Err(unreadable(path, "prober reported no usable duration")),
        };

        let mut spec = *spec;
        if let Some(fps) = source_fps {
            if spec.sampling_fps > fps {
                log::info!(
                    "{}: sampling rate capped at source rate {fps}",
                    path.display()
                );
                spec.sampling_fps = fps;
            }
        }
        Ok(DecodedVideo {
            path: path.to_path_buf(),
            spec,
            meta: VideoMeta {
                duration_sec: duration,
                source_path: source_label(path),
                source_fps,
            },
            config: config.clone(),
        })
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    pub fn spec(&self) -> FrameSpec {
        self.spec
    }

    pub fn expected_frames(&self) -> usize {
        self.spec.frame_count(self.meta.duration_sec)
    }

    fn decoder_args(&self) -> Vec<OsString> {
        let filter = format!(
            "fps={},scale={}:{}",
            self.spec.sampling_fps, self.spec.width, self.spec.height
        );
        let mut args: Vec<OsString> = ["-v", "error", "-nostdin", "-i"]
            .iter()
            .map(OsString::from)
            .collect();
        args.push(self.path.clone().into_os_string());
        for a in ["-an", "-sn", "-vf", &filter, "-f", "rawvideo", "-pix_fmt", "rgb24", "pipe:1"] {
            args.push(a.into());
        }
        args
    }

    pub(crate) fn stream(&self) -> Result<DecoderStream> {
        let mut child = Command::new(&self.config.ffmpeg)
            .args(self.decoder_args())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| unreadable(&self.path, format!("failed to start decoder: {e}")))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| unreadable(&self.path, "decoder has no stdout"))?;
        Ok(DecoderStream {
            child,
            reader: BufReader::with_capacity(1 << 20, stdout),
            spec: self.spec,
            expected: self.expected_frames(),
            next: 0,
        })
    }
}

fn parse_probe(text: &str) -> (Option<f64>, Option<f64>) {
    let mut duration = None;
    let mut fps = None;
    for line in text.lines() {
        let Some((key, value)) = line.trim().split_once('=') else {
            continue;
        };
        match key {
            "duration" => duration = value.parse::<f64>().ok().or(duration),
            "r_frame_rate" => {
                let rate = match value.split_once('/') {
                    Some((n, d)) => match (n.parse::<f64>(), d.parse::<f64>()) {
                        (Ok(n), Ok(d)) if d > 0.0 => Some(n / d),
                        _ => None,
                    },
                    None => value.parse().ok(),
                };
                fps = rate.filter(|r: &f64| r.is_finite() && *r > 0.0).or(fps);
            }
            _ => {}
        }
    }
    (duration, fps)
}

pub(crate) struct DecoderStream {
    child: Child,
    reader: BufReader<ChildStdout>,
    spec: FrameSpec,
    expected: usize,
    next: usize,
}

impl DecoderStream {
    pub(crate) fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.next >= self.expected {
            return Ok(None);
        }
        let mut buf = vec![0u8; self.spec.frame_len()];
        match read_full(&mut self.reader, &mut buf) {
            Ok(true) => {
                let frame = Frame::new(
                    self.next,
                    self.spec.time_of(self.next),
                    self.spec.width,
                    self.spec.height,
                    buf,
                );
                self.next += 1;
                Ok(Some(frame))
            }
            Ok(false) => Err(FrameError::TruncatedStream {
                expected: self.expected,
                got: self.next,
            }),
            Err(err) => Err(err.into()),
        }
    }
}

/// Fills `buf` completely; `Ok(false)` on EOF (including a partial frame).
fn read_full(reader: &mut impl Read, buf: &mut [u8]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => return Ok(false),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

impl Drop for DecoderStream {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_output_parsing() {
        let (d, f) = parse_probe("r_frame_rate=30000/1001\nduration=12.500000\n");
        assert_eq!(d, Some(12.5));
        assert!((f.unwrap() - 29.97002997).abs() < 1e-6);
        assert_eq!(parse_probe("duration=N/A\nr_frame_rate=0/0\n"), (None, None));
    }

    #[cfg(unix)]
    mod fake_decoder {
        use super::super::*;
        use crate::frame_io::{FrameStream, VideoSource};
        use std::os::unix::fs::PermissionsExt;

        // Emits `frames` deterministic frames of whatever size `scale=` asks for.
        fn install(dir: &Path, duration: &str, frames: usize) -> DecoderConfig {
            let probe = dir.join("fake-ffprobe");
            std::fs::write(
                &probe,
                format!("#!/bin/sh\necho r_frame_rate=25/1\necho duration={duration}\n"),
            )
            .unwrap();
            let ffmpeg = dir.join("fake-ffmpeg");
            std::fs::write(
                &ffmpeg,
                format!(
                    "#!/bin/sh\nfor a in \"$@\"; do case \"$a\" in fps=*) vf=\"$a\";; esac; done\n\
                     dims=${{vf##*scale=}}\nw=${{dims%%:*}}\nh=${{dims##*:}}\n\
                     yes 'scenekit' | tr -d '\\n' | head -c $((w * h * 3 * {frames}))\n"
                ),
            )
            .unwrap();
            for p in [&probe, &ffmpeg] {
                std::fs::set_permissions(p, std::fs::Permissions::from_mode(0o755)).unwrap();
            }
            DecoderConfig {
                ffmpeg,
                ffprobe: probe,
            }
        }

        fn open(dir: &Path, config: &DecoderConfig) -> VideoSource {
            let video = dir.join("clip.mp4");
            std::fs::write(&video, b"not really a video").unwrap();
            VideoSource::open(
                &video,
                &FrameSpec {
                    width: 32,
                    height: 16,
                    sampling_fps: 2.0,
                },
                config,
            )
            .unwrap()
        }

        #[test]
        fn reads_frames_from_pipe() {
            let dir = tempfile::tempdir().unwrap();
            let config = install(dir.path(), "3.0", 6);
            let source = open(dir.path(), &config);
            assert_eq!(source.meta().duration_sec, 3.0);
            assert_eq!(source.meta().source_fps, Some(25.0));
            let mut stream: FrameStream = source.stream().unwrap();
            let frames: Vec<Frame> = stream.by_ref().collect();
            assert_eq!(frames.len(), 6);
            assert!(stream.error().is_none());
            assert!(frames.iter().all(|f| f.pixels.len() == 32 * 16 * 3));
            assert_eq!(frames[5].time_sec, 2.5);
            // Same source twice yields identical bytes.
            let again: Vec<Frame> = source.stream().unwrap().collect();
            assert_eq!(frames, again);
            let picked = source.fetch(&[1, 4], crate::exec::Execution::Sequential).unwrap();
            assert_eq!(picked[&4], frames[4]);
        }

        #[test]
        fn early_exit_is_truncation() {
            let dir = tempfile::tempdir().unwrap();
            let config = install(dir.path(), "5.0", 3);
            let source = open(dir.path(), &config);
            let mut stream = source.stream().unwrap();
            assert_eq!(stream.by_ref().count(), 3);
            assert!(matches!(
                stream.error(),
                Some(FrameError::TruncatedStream {
                    expected: 10,
                    got: 3
                })
            ));
        }

        #[test]
        fn missing_decoder_is_unreadable() {
            let dir = tempfile::tempdir().unwrap();
            let video = dir.path().join("clip.mp4");
            std::fs::write(&video, b"x").unwrap();
            let config = DecoderConfig {
                ffmpeg: dir.path().join("nope"),
                ffprobe: dir.path().join("nope-probe"),
            };
            let err = VideoSource::open(&video, &FrameSpec::default(), &config).unwrap_err();
            assert!(matches!(err, FrameError::UnreadableSource { .. }));
        }
    }
}
