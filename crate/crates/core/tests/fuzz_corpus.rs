//! Replays the checked-in fuzz seeds through the fuzz target bodies.
//! `SEM4D_WRITE_SEEDS=1` rewrites the recipe seeds from the presets.

use std::path::PathBuf;

use sem4d_core::evaluation::{read_fixtures, write_fixtures};
use sem4d_core::fixture::{presets, Recipe};
use sem4d_core::pipeline::{FrameSpec, PipelineConfig};
use sem4d_core::semantics::InstanceTable;
use sem4d_core::tensor::{decode, encode, Archive, Element, TensorError};
use sem4d_core::SceneManifest;

fn corpus(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target)
}

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = corpus(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(data: &[u8]) -> &str {
    std::str::from_utf8(data).expect("text seed")
}

#[test]
fn manifest_seeds() {
    let mut valid = 0;
    for (name, data) in seeds("manifest_json") {
        let Ok(m) = SceneManifest::from_json_str(text(&data)) else { continue };
        valid += usize::from(m.check_structure().is_ok());
        let written = m.to_json_string();
        let again = SceneManifest::from_json_str(&written).expect(&name);
        assert_eq!(again.to_json_string(), written, "{name}");
    }
    assert!(valid >= 2);
}

fn check_tensor<T: Element>(bytes: &[u8], shape: &[usize]) -> bool {
    match decode::<T>(bytes, shape) {
        Ok(values) => {
            assert_eq!(encode(&values), bytes);
            true
        }
        Err(TensorError::ByteLength { .. } | TensorError::ShapeOverflow(_)) => false,
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn tensor_seeds() {
    let mut decoded = 0;
    for (_, data) in seeds("tensor_decode") {
        let [dtype, rank, rest @ ..] = data.as_slice() else { continue };
        let rank = (*rank % 5) as usize;
        let (dims, bytes) = rest.split_at(rank);
        let shape: Vec<usize> = dims
            .iter()
            .map(|&d| if d == 255 { usize::MAX / 3 } else { d as usize })
            .collect();
        decoded += usize::from(match dtype % 5 {
            0 => check_tensor::<f32>(bytes, &shape),
            1 => check_tensor::<f64>(bytes, &shape),
            2 => check_tensor::<u8>(bytes, &shape),
            3 => check_tensor::<u16>(bytes, &shape),
            _ => check_tensor::<u32>(bytes, &shape),
        });
    }
    // Two seeds are deliberately malformed.
    assert_eq!(decoded, 4);
}

#[test]
fn archive_seeds() {
    let members: Vec<u32> = (0..64).collect();
    let (mut archives, mut tables) = (0, 0);
    for (name, data) in seeds("archive_json") {
        if let Ok(a) = Archive::from_json_str(text(&data)) {
            Archive::from_json_str(&serde_json::to_string(&a).unwrap()).expect(&name);
            archives += 1;
        }
        if let Ok(t) = InstanceTable::from_json_and_members(text(&data), &members) {
            assert!(t.instances.iter().all(|i| i.members.iter().all(|m| (*m as usize) < members.len())));
            tables += 1;
        }
    }
    // scene.json is not an archive.
    assert_eq!((archives, tables), (2, 1));
}

#[test]
fn fixture_seeds() {
    for (name, data) in seeds("fixture_jsonl") {
        let fixtures = read_fixtures(data.as_slice()).expect(&name);
        let written = write_fixtures(&fixtures);
        assert_eq!(read_fixtures(written.as_bytes()).unwrap(), fixtures, "{name}");
    }
}

#[test]
fn config_seeds() {
    let mut configs = 0;
    for (name, data) in seeds("config_json") {
        let _ = FrameSpec::parse_list(text(&data));
        let Ok(c) = PipelineConfig::from_json_str(text(&data)) else { continue };
        let again = PipelineConfig::from_json_str(&c.canonical_json()).expect(&name);
        assert_eq!(again.fingerprint(), c.fingerprint());
        configs += 1;
    }
    assert_eq!(configs, 2);
}

#[test]
fn recipe_seeds_match_presets() {
    let dir = corpus("recipe_json");
    if std::env::var_os("SEM4D_WRITE_SEEDS").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        for name in presets::NAMES {
            let json = serde_json::to_string_pretty(&presets::by_name(name).unwrap()).unwrap();
            std::fs::write(dir.join(name), json).unwrap();
        }
    }
    for name in presets::NAMES {
        let data = std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let recipe = Recipe::from_json_str(text(&data)).expect(name);
        recipe.validate().expect(name);
        assert_eq!(recipe, presets::by_name(name).unwrap(), "{name} seed is stale");
    }
    for (name, data) in seeds("recipe_json") {
        if let Ok(r) = Recipe::from_json_str(text(&data)) {
            let _ = r.validate();
        } else {
            assert!(!presets::NAMES.contains(&name.as_str()));
        }
    }
}
