import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from models import ConfigError, DeployedModel, EncoderConfig, LossWeights, TrainConfig


class Config:
    # Encoder geometry; toy is the default
    PRESETS = {
        'toy': {'d_model': 64, 'n_heads': 2, 'n_blocks': 2, 'ffn_dim': 128, 'max_seq_len': 64},
        'mbert': {'d_model': 768, 'n_heads': 12, 'n_blocks': 12, 'ffn_dim': 3072, 'max_seq_len': 512},
    }
    DEFAULT_PRESET = 'toy'
    DROPOUT = 0.0  # inverted dropout, training only

    # Loss weights for intent CE, slot CE, intra KD, inter KD
    ALPHA = 0.9
    BETA = 0.1
    LAMBDA = 0.7
    GAMMA = 0.3

    # Schedule and batching (Adam uses beta1=0.9, beta2=0.98, eps=1e-8)
    BASE_LR = 1e-3
    WARMUP_STEPS = 100
    BATCH_SIZE = 8
    MAX_STEPS = 2000
    EVAL_EVERY = 100

    # Code-switching
    CODE_SWITCH_RATIO = 0.5
    MAX_PIECES = 400

    # Gradient checking
    GRADCHECK_H = 1e-6
    GRADCHECK_TOL = 1e-4
    GRADCHECK_SEEDS = 5

    ABLATION_SEEDS = 5

    DEPLOY = DeployedModel.MODEL_C
    SEED = 0
    RUN_DIR = 'run'

    LOG_LEVEL = 'INFO'
    LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


@dataclass
class RunConfig:
    train: str
    dev: str
    dictionary: str
    out_dir: str
    train_config: TrainConfig
    test_by_language: Dict[str, str] = field(default_factory=dict)


_SCALARS = {
    'seed': int, 'base_lr': float, 'warmup_steps': int, 'batch_size': int, 'max_steps': int,
    'eval_every': int, 'disable_intra': bool, 'disable_inter': bool, 'shared_init': bool,
    'max_pieces': int, 'deploy': str, 'preset': str, 'out_dir': str,
}
_PATHS = ('train', 'dev', 'dictionary')
_SECTIONS = {
    'loss_weights': {'alpha': float, 'beta': float, 'lambda': float, 'gamma': float},
    'code_switch': {'ratio': float, 'target_languages': list},
    'encoder': {'d_model': int, 'n_heads': int, 'n_blocks': int, 'ffn_dim': int, 'max_seq_len': int,
                'dropout': float},
}
ALLOWED_KEYS = set(_SCALARS) | set(_PATHS) | set(_SECTIONS) | {'test_by_language'}


def _type_ok(value: Any, expected: type) -> bool:
    if expected is bool:
        return isinstance(value, bool)
    if expected is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if expected is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, expected)


def _type_name(expected: type) -> str:
    return {bool: 'a boolean', int: 'an integer', float: 'a number', str: 'a string', list: 'a list'}[expected]


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge command-line values into the raw config; dotted keys address sections"""
    merged = json.loads(json.dumps(data))
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.partition('.')
        if name:
            if not isinstance(merged.get(section, {}), dict):
                continue
            merged.setdefault(section, {})[name] = value
        else:
            merged[key] = value
    return merged


def load_run_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Read and validate a run config; every problem is reported in one ConfigError"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from exc
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    data = apply_overrides(data, overrides or {})
    base_dir = os.path.dirname(os.path.abspath(path))
    problems: List[str] = []

    def resolve(value: str) -> str:
        return value if os.path.isabs(value) else os.path.join(base_dir, value)

    for key in sorted(set(data) - ALLOWED_KEYS):
        problems.append(f"unknown key '{key}'")

    for key, expected in _SCALARS.items():
        if key in data and not _type_ok(data[key], expected):
            problems.append(f"'{key}' must be {_type_name(expected)}, got {data[key]!r}")

    paths: Dict[str, str] = {}
    for key in _PATHS:
        if key not in data:
            problems.append(f"missing required key '{key}'")
        elif not isinstance(data[key], str):
            problems.append(f"'{key}' must be a path string, got {data[key]!r}")
        elif not os.path.exists(resolve(data[key])):
            problems.append(f"'{key}' path does not exist: {data[key]}")
        else:
            paths[key] = resolve(data[key])

    tests: Dict[str, str] = {}
    raw_tests = data.get('test_by_language', {})
    if not isinstance(raw_tests, dict):
        problems.append("'test_by_language' must be an object of language -> path")
    else:
        for language, test_path in raw_tests.items():
            if not isinstance(test_path, str) or not os.path.exists(resolve(test_path)):
                problems.append(f"'test_by_language.{language}' path does not exist: {test_path}")
            else:
                tests[language] = resolve(test_path)

    sections: Dict[str, Dict[str, Any]] = {}
    for section, fields in _SECTIONS.items():
        raw = data.get(section, {})
        if not isinstance(raw, dict):
            problems.append(f"'{section}' must be an object")
            continue
        for key in sorted(set(raw) - set(fields)):
            problems.append(f"unknown key '{section}.{key}'")
        for key, expected in fields.items():
            if key in raw and not _type_ok(raw[key], expected):
                problems.append(f"'{section}.{key}' must be {_type_name(expected)}, got {raw[key]!r}")
        sections[section] = {k: v for k, v in raw.items() if k in fields}

    preset = data.get('preset', Config.DEFAULT_PRESET)
    if isinstance(preset, str) and preset not in Config.PRESETS:
        problems.append(f"'preset' must be one of {sorted(Config.PRESETS)}, got {preset!r}")
    deploy = data.get('deploy', Config.DEPLOY.value)
    if isinstance(deploy, str) and deploy not in {m.value for m in DeployedModel}:
        problems.append(f"'deploy' must be model_o or model_c, got {deploy!r}")
    languages = sections.get('code_switch', {}).get('target_languages', [])
    if isinstance(languages, list) and any(not isinstance(language, str) for language in languages):
        problems.append("'code_switch.target_languages' must be a list of strings")

    if problems:
        raise ConfigError(problems)

    train_config = _build_train_config(data, sections, preset, deploy, problems)
    if problems:
        raise ConfigError(problems)

    out_dir = resolve(data.get('out_dir', Config.RUN_DIR))
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError([f"'out_dir' cannot be created: {exc}"]) from exc

    return RunConfig(train=paths['train'], dev=paths['dev'], dictionary=paths['dictionary'],
                     out_dir=out_dir, train_config=train_config, test_by_language=tests)


def _build_train_config(data: Mapping[str, Any], sections: Mapping[str, Mapping[str, Any]], preset: str,
                        deploy: str, problems: List[str]) -> Optional[TrainConfig]:
    geometry = dict(Config.PRESETS[preset], dropout=Config.DROPOUT)
    geometry.update(sections['encoder'])
    weights = sections['loss_weights']
    switch = sections['code_switch']
    encoder = loss_weights = None
    try:
        encoder = EncoderConfig(**geometry)
    except ConfigError as exc:
        problems.extend(exc.problems)
    try:
        loss_weights = LossWeights(alpha=weights.get('alpha', Config.ALPHA), beta=weights.get('beta', Config.BETA),
                                   lambda_=weights.get('lambda', Config.LAMBDA),
                                   gamma=weights.get('gamma', Config.GAMMA))
    except ConfigError as exc:
        problems.extend(exc.problems)
    try:
        return TrainConfig(
            encoder=encoder or EncoderConfig(),
            loss_weights=loss_weights or LossWeights(),
            ratio=float(switch.get('ratio', Config.CODE_SWITCH_RATIO)),
            target_languages=tuple(switch.get('target_languages', ())),
            base_lr=float(data.get('base_lr', Config.BASE_LR)),
            warmup_steps=data.get('warmup_steps', Config.WARMUP_STEPS),
            batch_size=data.get('batch_size', Config.BATCH_SIZE),
            max_steps=data.get('max_steps', Config.MAX_STEPS),
            eval_every=data.get('eval_every', Config.EVAL_EVERY),
            seed=data.get('seed', Config.SEED),
            disable_intra=data.get('disable_intra', False),
            disable_inter=data.get('disable_inter', False),
            shared_init=data.get('shared_init', False),
            deploy=DeployedModel(deploy),
            max_pieces=data.get('max_pieces', Config.MAX_PIECES),
        )
    except ConfigError as exc:
        problems.extend(exc.problems)
        return None
