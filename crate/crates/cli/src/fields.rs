//! Lab fields from files or named profiles.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use anyhow::{bail, Context, Result};
use logcert::lab::GridField;

use crate::args::{FieldArgs, Profile};

pub type ProfileFn = Box<dyn Fn(f64, f64) -> f64 + Sync>;

/// The profile as a function of `(x, y)`.
pub fn profile_fn(profile: Profile, power: f64, scale: f64) -> ProfileFn {
    match profile {
        Profile::ClippedLog => Box::new(|x: f64, y: f64| x.hypot(y).ln().max(-1.0)),
        Profile::Log => Box::new(|x: f64, y: f64| x.hypot(y).ln()),
        Profile::Kinked => Box::new(|x: f64, y: f64| x.hypot(y).ln().max(-1.0) - (x * x + y * y)),
        Profile::LogPower => Box::new(move |x: f64, y: f64| x.hypot(y).ln().abs().powf(-power).min(1.0)),
        Profile::RadialLog => Box::new(logcert::lab::radial_profile(scale, power)),
        Profile::Linear => Box::new(move |x: f64, y: f64| scale * x + y),
        Profile::Constant => Box::new(move |_, _| scale),
    }
}

/// Defaults a command applies to the unset fields of a [`FieldArgs`].
#[derive(Debug, Clone, Copy)]
pub struct FieldDefaults {
    pub profile: Profile,
    pub nodes: usize,
    pub half: f64,
    pub power: f64,
    pub scale: f64,
}

/// Resolved field together with the profile it came from, if any.
pub struct Loaded {
    pub field: GridField,
    pub profile: Option<(ProfileFn, f64)>,
}

pub fn read_field(path: &Path) -> Result<GridField> {
    let mut f = BufReader::new(File::open(path).with_context(|| format!("opening field {}", path.display()))?);
    let mut magic = [0u8; 4];
    let mut head = Vec::new();
    let n = f.by_ref().take(4).read_to_end(&mut head)?;
    magic[..n].copy_from_slice(&head);
    let chained = head.as_slice().chain(f);
    let field = if &magic == b"GF01" { GridField::read_binary(chained) } else { GridField::read_csv(chained) };
    field.with_context(|| format!("reading field {}", path.display()))
}

pub fn load(args: &FieldArgs, d: FieldDefaults) -> Result<Loaded> {
    if let Some(path) = &args.field {
        if args.profile.is_some() {
            bail!("--field and --profile are mutually exclusive");
        }
        return Ok(Loaded { field: read_field(path)?, profile: None });
    }
    let f = profile_fn(args.profile.unwrap_or(d.profile), args.power.unwrap_or(d.power), args.scale.unwrap_or(d.scale));
    let nodes = args.nodes.unwrap_or(d.nodes);
    let half = args.half.unwrap_or(d.half);
    if !(half > 0.0) {
        bail!("--half must be positive");
    }
    let field = GridField::from_fn(nodes, -half, half, &f)?;
    Ok(Loaded { field, profile: Some((f, half)) })
}
