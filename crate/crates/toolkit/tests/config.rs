use duck_core::data::{ForgetSpec, Scenario};
use duck_toolkit::config::{ConfigError, DatasetConfig, Method, ReportFormat};
use duck_toolkit::parse_config;

const MINIMAL_CR: &str = "[dataset]\nkind = \"blobs\"\n\n[cr]\n";

#[test]
fn minimal_class_removal_defaults() {
    let c = parse_config(MINIMAL_CR).unwrap();
    assert_eq!(c.method, Method::Duck);
    assert_eq!(c.scenario(), Scenario::ClassRemoval);
    assert_eq!(c.seeds, vec![42]);
    assert_eq!(c.format, ReportFormat::Json);
    assert!(!c.parallel && c.output.is_none());
    assert_eq!(
        c.dataset,
        DatasetConfig::Blobs {
            classes: 10,
            dim: 32,
            train_per_class: 200,
            test_per_class: 100,
            spread: 0.2,
            seed: 42
        }
    );
    assert_eq!(c.model.hidden, vec![64, 32]);
    assert_eq!(c.model.embedding_dim, 16);
    let sets = &c.cr.as_ref().unwrap().forget_sets;
    assert_eq!(sets, &(0..10).map(|k| vec![k]).collect::<Vec<_>>());
    assert_eq!(c.duck.lambda_forget, Some(1.5));
    assert_eq!(c.duck.lambda_retain, Some(1.5));
    assert_eq!(c.duck.batch_ratio, Some(5));
    assert_eq!(c.duck.temperature, Some(2.0));
    assert_eq!(c.duck.target_forget_accuracy, Some(0.01));
    assert_eq!(c.mia.enabled, Some(false));
    assert_eq!(c.runs().len(), 10);
}

#[test]
fn homogeneous_defaults() {
    let c = parse_config("[dataset]\nkind = \"blobs\"\n[hr]\n").unwrap();
    assert_eq!(c.seeds, vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 42]);
    assert_eq!(c.duck.lambda_forget, Some(1.0));
    assert_eq!(c.duck.lambda_retain, Some(1.4));
    assert_eq!(c.duck.target_forget_accuracy, None);
    assert_eq!(c.unlearn_config(0.87).target_forget_accuracy, 0.87);
    assert!(c.mia_enabled());
    let runs = c.runs();
    assert_eq!(runs.len(), 10);
    assert!(runs.iter().all(|r| r.forget == ForgetSpec::Fraction(0.1)));
}

#[test]
fn runs_cross_sets_with_seeds() {
    let c = parse_config("seeds = [1, 2, 3]\n[dataset]\nkind = \"blobs\"\n[cr]\nforget_sets = [[4], [2, 7]]\n").unwrap();
    let runs = c.runs();
    assert_eq!(runs.len(), 6);
    assert_eq!(runs[0].forget, ForgetSpec::Classes(vec![4]));
    assert_eq!(runs[5].forget, ForgetSpec::Classes(vec![2, 7]));
    assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2, 3, 1, 2, 3]);
}

fn invalid(text: &str) -> String {
    match parse_config(text) {
        Err(e @ ConfigError::Invalid(_)) => e.to_string(),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn scenario_sections_are_exclusive() {
    assert!(invalid("[dataset]\nkind = \"blobs\"\n[cr]\n[hr]\n").contains("mutually exclusive"));
    assert!(invalid("[dataset]\nkind = \"blobs\"\n").contains("missing scenario"));
}

#[test]
fn inconsistent_fields_rejected() {
    invalid("method = \"retrain\"\n[dataset]\nkind = \"blobs\"\n[cr]\n[duck]\ndisable_forget_loss = true\n");
    invalid("[dataset]\nkind = \"blobs\"\n[cr]\n[duck]\ndisable_forget_loss = true\ndisable_retain_loss = true\n");
    invalid("[dataset]\nkind = \"blobs\"\nclasses = 4\n[cr]\nforget_sets = [[4]]\n");
    invalid("[dataset]\nkind = \"blobs\"\n[hr]\nfraction = 1.5\n");
    invalid("[dataset]\nkind = \"blobs\"\n[cr]\n[duck]\nbatch_ratio = 0\n");
}

#[test]
fn unknown_keys_and_syntax_errors() {
    for text in [
        "[dataset]\nkind = \"blobs\"\nclases = 3\n[cr]\n",
        "colour = 1\n[dataset]\nkind = \"blobs\"\n[cr]\n",
        "[dataset]\nkind = \"blobs\"\n[cr]\n[duck]\nlambda = 2.0\n",
        "[dataset]\nkind = \"blobs\"\n[cr]\n[extra]\n",
    ] {
        assert!(matches!(parse_config(text), Err(ConfigError::Syntax(_))), "{text}");
    }
    let err = parse_config("[dataset]\nkind = \"blobs\"\n[cr]\nforget_sets = [[1]\n").unwrap_err();
    assert!(err.to_string().contains("line 4"), "{err}");
    let err = parse_config("[model]\nhidden = [64, 32]\n[cr]\n").unwrap_err();
    assert!(err.to_string().contains("dataset"), "{err}");
}

#[test]
fn echo_round_trips() {
    let sources = [
        MINIMAL_CR.to_string(),
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk_cr.toml")).unwrap(),
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk_hr.toml")).unwrap(),
        "method = \"neg_grad\"\nformat = \"csv\"\noutput = \"r.csv\"\n[dataset]\nkind = \"idx\"\n\
         train_images = \"a\"\ntrain_labels = \"b\"\ntest_images = \"c\"\ntest_labels = \"d\"\n\
         [cr]\nforget_sets = [[1, 2]]\n[model]\ncache_dir = \"cache\"\n"
            .to_string(),
        "[dataset]\nkind = \"cifar\"\ntrain_files = [\"x\"]\ntest_files = [\"y\"]\n[hr]\nfraction = 0.25\n\
         [duck]\ndisable_retain_loss = true\ntarget_forget_accuracy = 0.5\n"
            .to_string(),
    ];
    for src in sources {
        let c = parse_config(&src).unwrap();
        let echo = c.to_toml();
        assert_eq!(parse_config(&echo).unwrap(), c, "{echo}");
    }
}

#[test]
fn method_and_format_names() {
    for m in Method::ALL {
        assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
    }
    assert!("ducks".parse::<Method>().is_err());
    assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
    assert!("xml".parse::<ReportFormat>().is_err());
}
