"""Speaker verification toolkit: log-mel front-end, ResNet trunk, training
losses and detection metrics, backed by a C++ core."""

from ._svkit import (
    Model,
    SvkitError,
    aam_softmax,
    am_softmax,
    angular_prototypical,
    apply_rir,
    compute_eer,
    compute_min_dcf,
    cosine,
    crop_segment,
    evaluate,
    extract_features,
    instance_normalize,
    log_mel_spectrogram,
    lr_at,
    measure_snr_db,
    mix_at_snr,
    preemphasize,
    score_embeddings,
    softmax_ce,
    train_demo,
)

__all__ = [
    "Model",
    "SvkitError",
    "aam_softmax",
    "am_softmax",
    "angular_prototypical",
    "apply_rir",
    "compute_eer",
    "compute_min_dcf",
    "cosine",
    "crop_segment",
    "evaluate",
    "extract_features",
    "instance_normalize",
    "log_mel_spectrogram",
    "lr_at",
    "measure_snr_db",
    "mix_at_snr",
    "preemphasize",
    "score_embeddings",
    "softmax_ce",
    "train_demo",
]
