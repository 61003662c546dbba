use std::ffi::{CStr, CString};
use std::ptr;

use spanlink_ffi::*;

const MEDIC: &str = "# DiseaseName\tDiseaseID\tAltDiseaseIDs\tDefinition\tParentIDs\tTreeNumbers\tParentTreeNumbers\tSynonyms\n\
Breast Neoplasms\tMESH:D001943\t\t\t\t\t\tbreast cancer|breast tumor\n\
Hepatitis\tMESH:D006505\t\t\t\t\t\tliver inflammation\n";

fn matcher() -> *mut SlMatcher {
    let text = CString::new(MEDIC).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { sl_matcher_from_medic_text(text.as_ptr(), &mut m) };
    assert_eq!(st, SlStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = sl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn dict_score_and_top_k() {
    let m = matcher();
    assert_eq!(unsafe { sl_matcher_concept_count(m) }, 2);
    let text = CString::new("breast cancer").unwrap();
    let cui = CString::new("D001943").unwrap();
    let mut score = 0.0;
    assert_eq!(
        unsafe { sl_matcher_dict_score(m, text.as_ptr(), cui.as_ptr(), &mut score) },
        SlStatus::Ok
    );
    assert!((score - 1.0).abs() < 1e-12);
    assert!(sl_last_error_message().is_null());

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { sl_matcher_top_k(m, text.as_ptr(), 5, &mut json) },
        SlStatus::Ok
    );
    let parsed: serde_json::Value =
        serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    unsafe { sl_string_free(json) };
    let hits = parsed.as_array().unwrap();
    assert_eq!(hits.len(), 2);
    assert_eq!(hits[0]["cui"], "MESH:D001943");
    assert!((hits[0]["score"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let second = hits[1]["score"].as_f64().unwrap();
    assert!(second > 0.0 && second < 1.0);
    unsafe { sl_matcher_free(m) };
}

#[test]
fn errors_are_reported() {
    let m = matcher();
    let text = CString::new("x").unwrap();
    let cui = CString::new("MESH:D999999").unwrap();
    let mut score = 0.0;
    let st = unsafe { sl_matcher_dict_score(m, text.as_ptr(), cui.as_ptr(), &mut score) };
    assert_eq!(st, SlStatus::NotFound);
    assert!(last_error().contains("D999999"));

    let st = unsafe { sl_matcher_dict_score(ptr::null(), text.as_ptr(), cui.as_ptr(), &mut score) };
    assert_eq!(st, SlStatus::NullArgument);

    let bad = CString::new("not a medic file").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { sl_matcher_from_medic_text(bad.as_ptr(), &mut out) },
        SlStatus::Data
    );
    assert!(out.is_null());

    let path = CString::new("/nonexistent/spanlink.dict").unwrap();
    assert_eq!(
        unsafe { sl_matcher_load(path.as_ptr(), &mut out) },
        SlStatus::Data
    );

    let bytes = [0xffu8, 0xfe, 0];
    let st = unsafe { sl_matcher_top_k(m, bytes.as_ptr().cast(), 1, &mut ptr::null_mut()) };
    assert_eq!(st, SlStatus::InvalidUtf8);
    unsafe { sl_matcher_free(m) };
    // null handles are ignored
    unsafe { sl_matcher_free(ptr::null_mut()) };
    unsafe { sl_model_free(ptr::null_mut()) };
    unsafe { sl_string_free(ptr::null_mut()) };
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/spanlink.h"))
            .unwrap();
    for name in [
        "sl_last_error_message",
        "sl_version",
        "sl_string_free",
        "sl_matcher_from_medic_text",
        "sl_matcher_load",
        "sl_matcher_free",
        "sl_matcher_concept_count",
        "sl_matcher_dict_score",
        "sl_matcher_top_k",
        "sl_model_load",
        "sl_model_free",
        "sl_model_predict",
        "SL_STATUS_OK",
        "typedef struct SlMatcher SlMatcher",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn model_round_trip_through_files() {
    use spanlink::config::RunConfig;
    use spanlink::lexicon::parse_medic;
    use spanlink::matcher::SynonymIndex;
    use spanlink::pipeline::init_model;
    use spanlink::spanmodel::{write_checkpoint, Checkpoint};

    let dir = tempfile::tempdir().unwrap();
    let inv = parse_medic(MEDIC, "t").unwrap();
    let index = SynonymIndex::from_inventory(&inv, Default::default()).unwrap();
    let config = RunConfig {
        embedding_dim: 8,
        hash_buckets: 64,
        hidden_dim: 8,
        width_dim: 4,
        ..RunConfig::default()
    };
    let model = init_model(&config, index.concept_count() + 1).unwrap();
    let ck_path = dir.path().join("m.ckpt");
    let dict_path = dir.path().join("d.dict");
    index
        .write_to(std::fs::File::create(&dict_path).unwrap())
        .unwrap();
    let ck = Checkpoint {
        model,
        inventory_hash: index.inventory_hash().to_string(),
        run_config: config.to_text(),
    };
    write_checkpoint(&ck, std::fs::File::create(&ck_path).unwrap()).unwrap();

    let ck_c = CString::new(ck_path.to_str().unwrap()).unwrap();
    let dict_c = CString::new(dict_path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { sl_model_load(ck_c.as_ptr(), dict_c.as_ptr(), &mut model) },
        SlStatus::Ok
    );

    let title = CString::new("Breast cancer in men.").unwrap();
    let abs = CString::new("").unwrap();
    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { sl_model_predict(model, title.as_ptr(), abs.as_ptr(), &mut json) },
        SlStatus::Ok
    );
    let parsed: serde_json::Value =
        serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    unsafe { sl_string_free(json) };
    for p in parsed.as_array().unwrap() {
        let (s, e) = (p["start"].as_u64().unwrap(), p["end"].as_u64().unwrap());
        assert!(s < e && e <= 21);
    }
    unsafe { sl_model_free(model) };

    // a dictionary other than the training one is rejected
    let other = parse_medic(
        &MEDIC.replace("liver inflammation", "hepatic inflammation"),
        "t",
    )
    .unwrap();
    let other = SynonymIndex::from_inventory(&other, Default::default()).unwrap();
    other
        .write_to(std::fs::File::create(&dict_path).unwrap())
        .unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(
        unsafe { sl_model_load(ck_c.as_ptr(), dict_c.as_ptr(), &mut model) },
        SlStatus::Config
    );
    assert!(last_error().contains("different dictionary"));
}
