mod common;

use duck_core::metrics::accuracy;
use duck_toolkit::cache::{decode_model, encode_model, load_model, CacheError, CacheOutcome, MAGIC};
use duck_toolkit::prepare;

#[test]
fn second_prepare_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_cr("", "[[0]]");
    cfg.model.cache_dir = Some(dir.path().to_path_buf());

    let first = prepare(&cfg, None).unwrap();
    assert_eq!(first.cache, CacheOutcome::Stored);
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);

    let second = prepare(&cfg, None).unwrap();
    assert_eq!(second.cache, CacheOutcome::Hit);
    assert_eq!(second.original, first.original);
    assert_eq!(second.original_test_accuracy, first.original_test_accuracy);
    assert_eq!(
        accuracy(&second.original, &second.train).unwrap(),
        first.original_train_accuracy
    );

    // A different model seed is a different key.
    cfg.model.seed += 1;
    assert_eq!(prepare(&cfg, None).unwrap().cache, CacheOutcome::Stored);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn damaged_cache_file_is_retrained_and_replaced() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_cr("", "[[1]]");
    cfg.model.cache_dir = Some(dir.path().to_path_buf());
    let clean = prepare(&cfg, None).unwrap();
    let path = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_model(&path), Err(CacheError::BadMagic)));

    let again = prepare(&cfg, None).unwrap();
    match &again.cache {
        CacheOutcome::Replaced(reason) => assert!(reason.contains("magic"), "{reason}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(again.original, clean.original);
    assert_eq!(prepare(&cfg, None).unwrap().cache, CacheOutcome::Hit);
}

#[test]
fn file_layout() {
    let cfg = common::small_cr("", "[[0]]");
    let model = prepare(&cfg, None).unwrap().original;
    let bytes = encode_model(&model);
    assert_eq!(&bytes[..8], &MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    // Weight and bias for two hidden layers, the embedding and the head.
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
    assert!(bytes.len() > model.parameter_count() * 8);
    assert_eq!(decode_model(&bytes).unwrap(), model);

    let mut future = bytes.clone();
    future[8] = 2;
    assert!(matches!(decode_model(&future), Err(CacheError::Version { found: 2 })));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode_model(&long), Err(CacheError::Trailing { extra: 1 })));
    assert!(matches!(
        decode_model(&bytes[..bytes.len() - 3]),
        Err(CacheError::Truncated { .. })
    ));
}
