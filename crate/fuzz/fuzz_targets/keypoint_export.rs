#![no_main]

use libfuzzer_sys::fuzz_target;
use skelact::pose_ingest::{parse_keypoint_export, preprocess_export, PreprocessConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(parsed) = parse_keypoint_export(text, "fuzz") {
        if let Ok((seq, _)) = preprocess_export(text, "fuzz", 0, &PreprocessConfig::default()) {
            assert_eq!(seq.len(), parsed.frames.len());
        }
    }
});
