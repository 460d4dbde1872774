#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = orthnewton::io::parse_matrix_file(text) {
        assert!(m.is_square());
        let again = orthnewton::io::MatrixFile::from_matrix(&m, None).to_json();
        assert_eq!(orthnewton::io::parse_matrix_file(&again).unwrap(), m);
    }
});
