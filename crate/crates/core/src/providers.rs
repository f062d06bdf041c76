//! Adapter that runs a segmentation provider as an external process.
//!
//! Protocol (one request per process invocation):
//!   - semantic:   PNG (8-bit RGB) on stdin, text prompt as the last
//!                 argument; 8-bit grayscale or 1-bit PNG mask on stdout.
//!   - normals:    PNG (8-bit RGB) on stdin; 3-channel PFM on stdout,
//!                 components mapped from [0,255] irrelevant — PFM is float.
//!   - promptable: 3-channel PFM normal map on stdin, prompt points as
//!                 "row,col" arguments; PNG mask on stdout.
//! Non-zero exit status or undecodable output surfaces as a provider error.

use std::io::Write;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image, PixelCoord};
use crate::io::{decode_mask_png, encode_image_png, encode_pfm, decode_pfm};
use crate::mask::{NormalMap, SegmentationProviders};
use crate::math::Vec3;

/// Shell-out provider: each capability is a command template; empty
/// commands mean the capability is unavailable.
#[derive(Clone, Debug, Default)]
pub struct ExternalProcessProvider {
    /// Command + fixed args for the semantic mask; the text prompt is
    /// appended as the final argument.
    pub semantic_cmd: Vec<String>,
    /// Command + fixed args for normal estimation.
    pub normals_cmd: Vec<String>,
    /// Command + fixed args for promptable segmentation; points are
    /// appended as "row,col" arguments.
    pub promptable_cmd: Vec<String>,
}

fn run_process(cmd: &[String], stdin_bytes: &[u8]) -> Result<Vec<u8>> {
    if cmd.is_empty() {
        return Err(Error::Provider("no command configured".into()));
    }
    let mut child = Command::new(&cmd[0])
        .args(&cmd[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Provider(format!("spawn {}: {e}", cmd[0])))?;
    child
        .stdin
        .as_mut()
        .expect("stdin piped")
        .write_all(stdin_bytes)
        .map_err(|e| Error::Provider(format!("write stdin: {e}")))?;
    let out = child
        .wait_with_output()
        .map_err(|e| Error::Provider(format!("wait: {e}")))?;
    if !out.status.success() {
        return Err(Error::Provider(format!(
            "{} exited with {}: {}",
            cmd[0],
            out.status,
            String::from_utf8_lossy(&out.stderr)
        )));
    }
    Ok(out.stdout)
}

impl SegmentationProviders for ExternalProcessProvider {
    fn semantic(&self, image: &Image, text_prompt: &str) -> Result<BinaryMask> {
        let mut cmd = self.semantic_cmd.clone();
        if !cmd.is_empty() {
            cmd.push(text_prompt.to_string());
        }
        let png = encode_image_png(image)?;
        let out = run_process(&cmd, &png)?;
        decode_mask_png(&out)
    }

    fn normals(&self) -> Result<NormalMap> {
        // The adapter is stateless: callers that need per-view normals
        // pass the view image through `normals_for`.
        Err(Error::Provider(
            "external normals require an input image; use normals_for".into(),
        ))
    }

    fn promptable(&self, normal_map: &NormalMap, points: &[PixelCoord]) -> Result<BinaryMask> {
        let mut cmd = self.promptable_cmd.clone();
        if !cmd.is_empty() {
            for p in points {
                cmd.push(format!("{},{}", p.row, p.col));
            }
        }
        let mut img = Image::zeros(normal_map.width, normal_map.height, 3);
        for r in 0..normal_map.height {
            for c in 0..normal_map.width {
                let n = normal_map.get(r, c);
                img.set(r, c, 0, n.x);
                img.set(r, c, 1, n.y);
                img.set(r, c, 2, n.z);
            }
        }
        let pfm = encode_pfm(&img)?;
        let out = run_process(&cmd, &pfm)?;
        decode_mask_png(&out)
    }
}

impl ExternalProcessProvider {
    /// Normal estimation with an explicit input image.
    pub fn normals_for(&self, image: &Image) -> Result<NormalMap> {
        let png = encode_image_png(image)?;
        let out = run_process(&self.normals_cmd, &png)?;
        let decoded = decode_pfm(&out)?;
        if decoded.channels != 3 {
            return Err(Error::Provider(format!(
                "normals PFM must have 3 channels, got {}",
                decoded.channels
            )));
        }
        Ok(NormalMap::from_fn(
            decoded.width,
            decoded.height,
            |r, c| {
                let v = Vec3::new(
                    decoded.get(r, c, 0),
                    decoded.get(r, c, 1),
                    decoded.get(r, c, 2),
                );
                let n = v.norm();
                if n > 1e-9 {
                    v / n
                } else {
                    Vec3::new(0.0, 0.0, -1.0)
                }
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::os::unix::fs::PermissionsExt;

    fn script_provider(dir: &std::path::Path, mask_png: &[u8]) -> Vec<String> {
        // A stand-in external segmenter: drains stdin, emits a fixed mask.
        let mask_path = dir.join("fixed_mask.png");
        std::fs::write(&mask_path, mask_png).unwrap();
        let script = dir.join("segmenter.sh");
        std::fs::write(
            &script,
            format!("#!/bin/sh\ncat > /dev/null\ncat {}\n", mask_path.display()),
        )
        .unwrap();
        let mut perms = std::fs::metadata(&script).unwrap().permissions();
        perms.set_mode(0o755);
        std::fs::set_permissions(&script, perms).unwrap();
        vec![script.display().to_string()]
    }

    #[test]
    fn promptable_round_trips_through_process() {
        let dir = tempfile::tempdir().unwrap();
        let expect = BinaryMask::from_fn(6, 4, |r, c| (r + c) % 2 == 0);
        let png = crate::io::encode_mask_png(&expect).unwrap();
        let provider = ExternalProcessProvider {
            promptable_cmd: script_provider(dir.path(), &png),
            ..ExternalProcessProvider::default()
        };
        let normals = NormalMap::from_fn(6, 4, |_, _| Vec3::new(0.0, 0.0, 1.0));
        let got = provider
            .promptable(&normals, &[PixelCoord { row: 0, col: 0 }])
            .unwrap();
        assert_eq!(got, expect);
    }

    #[test]
    fn failing_process_surfaces_as_provider_error() {
        let provider = ExternalProcessProvider {
            promptable_cmd: vec!["/bin/false".into()],
            ..ExternalProcessProvider::default()
        };
        let normals = NormalMap::from_fn(2, 2, |_, _| Vec3::new(0.0, 0.0, 1.0));
        match provider.promptable(&normals, &[PixelCoord { row: 0, col: 0 }]) {
            Err(Error::Provider(_)) => {}
            other => panic!("expected provider error, got {other:?}"),
        }
    }

    #[test]
    fn missing_command_is_a_provider_error() {
        let provider = ExternalProcessProvider::default();
        let normals = NormalMap::from_fn(2, 2, |_, _| Vec3::new(0.0, 0.0, 1.0));
        assert!(matches!(
            provider.promptable(&normals, &[PixelCoord { row: 0, col: 0 }]),
            Err(Error::Provider(_))
        ));
    }
}
