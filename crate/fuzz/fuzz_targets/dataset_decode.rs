#![no_main]

use libfuzzer_sys::fuzz_target;
use skelact::pose_ingest::format::{decode_dataset, encode_dataset};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = decode_dataset(data) {
        let bytes = encode_dataset(&ds);
        assert_eq!(bytes.as_slice(), data);
    }
});
