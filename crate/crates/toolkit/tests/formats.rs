use duck_toolkit::formats::{
    load_cifar_binary, load_idx, write_cifar_binary, write_idx, FormatError, CIFAR_PIXELS, CIFAR_RECORD,
};

#[test]
fn idx_two_by_two_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
    write_idx(&img, &lab, 2, 2, &[0, 255, 0, 255], &[1]).unwrap();
    let d = load_idx(&img, &lab).unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d.features().row(0), &[0.0, 1.0, 0.0, 1.0]);
    assert_eq!(d.labels(), &[1]);
}

#[test]
fn idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
    let n = 25;
    let pixels: Vec<u8> = (0..n * 28 * 28).map(|i| (i * 37 % 256) as u8).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
    write_idx(&img, &lab, 28, 28, &pixels, &labels).unwrap();
    let d = load_idx(&img, &lab).unwrap();
    assert_eq!((d.len(), d.dim(), d.num_classes()), (n, 784, 10));
    // Exact inverse of the scaling recovers every byte.
    let back: Vec<u8> = d.features().data().iter().map(|v| (v * 255.0).round() as u8).collect();
    assert_eq!(back, pixels);
    assert_eq!(d.labels().iter().map(|&y| y as u8).collect::<Vec<_>>(), labels);

    // Big-endian header fields.
    let raw = std::fs::read(&img).unwrap();
    assert_eq!(&raw[..4], &[0, 0, 8, 3]);
    assert_eq!(&raw[4..8], &[0, 0, 0, 25]);
    assert_eq!(&std::fs::read(&lab).unwrap()[..4], &[0, 0, 8, 1]);
}

#[test]
fn idx_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (img, lab) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
    write_idx(&img, &lab, 2, 2, &[], &[]).unwrap();
    assert!(matches!(load_idx(&img, &lab), Err(FormatError::Empty { .. })));

    write_idx(&img, &lab, 2, 2, &[1, 2, 3, 4], &[0]).unwrap();
    // Swapped files: the label file has the wrong magic for images.
    let err = load_idx(&lab, &img).unwrap_err();
    assert!(matches!(err, FormatError::Malformed { offset: 0, .. }), "{err}");

    let mut short = std::fs::read(&img).unwrap();
    short.truncate(18);
    std::fs::write(&img, &short).unwrap();
    match load_idx(&img, &lab).unwrap_err() {
        FormatError::Malformed { offset, .. } => assert_eq!(offset, 18),
        other => panic!("{other}"),
    }
    assert!(matches!(
        load_idx(&dir.path().join("missing"), &lab),
        Err(FormatError::Io { .. })
    ));
}

fn record(label: u8, seed: usize) -> (u8, Vec<u8>) {
    (label, (0..CIFAR_PIXELS).map(|i| ((i + seed) * 31 % 256) as u8).collect())
}

#[test]
fn cifar_single_record() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.bin");
    write_cifar_binary(&p, &[record(7, 0)]).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), CIFAR_RECORD as u64);
    let d = load_cifar_binary(&[&p]).unwrap();
    assert_eq!(d.labels(), &[7]);
    assert_eq!((d.dim(), d.num_classes()), (3072, 10));
}

#[test]
fn cifar_round_trip_keeps_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    let first: Vec<_> = (0..4).map(|i| record(i as u8, i)).collect();
    let second: Vec<_> = (0..3).map(|i| record(9 - i as u8, 100 + i)).collect();
    write_cifar_binary(&a, &first).unwrap();
    write_cifar_binary(&b, &second).unwrap();
    let d = load_cifar_binary(&[&a, &b]).unwrap();
    let all: Vec<_> = first.iter().chain(&second).collect();
    assert_eq!(d.len(), all.len());
    for (row, (label, pixels)) in all.iter().enumerate() {
        assert_eq!(d.labels()[row], *label as usize);
        let back: Vec<u8> = d.features().row(row).iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(&back, pixels);
    }
}

#[test]
fn cifar_bad_length() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.bin");
    std::fs::write(&p, vec![0u8; 2 * CIFAR_RECORD - 1]).unwrap();
    match load_cifar_binary(&[&p]).unwrap_err() {
        FormatError::Malformed { offset, .. } => assert_eq!(offset, CIFAR_RECORD),
        other => panic!("{other}"),
    }
}
