#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = orthnewton::io::decode_wav_mono16(data) {
        assert!(samples.iter().all(|v| (-1.0..1.0).contains(v)));
    }
    let _ = orthnewton::io::wav_sample_rate(data);
});
