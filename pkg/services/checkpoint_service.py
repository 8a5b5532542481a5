"""
Binary checkpoint container.

Layout (all integers little-endian):
    magic        8 bytes  b'XSLUCKPT'
    version      uint32
    header_len   uint32, followed by a UTF-8 JSON header
    n_blocks     uint32, followed by n_blocks parameter blocks:
        name_len uint16, name (UTF-8)
        ndim     uint8, ndim x uint32 dims
        values   row-major float64 ('<f8')
"""
import json
import logging
import os
import struct
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import BinaryIO, Dict

import numpy as np

from models import CheckpointError, DeployedModel, EncoderConfig, LabelVocab, SubwordVocab
from services.model_service import DualModel, SluModel

logger = logging.getLogger(__name__)

MAGIC = b'XSLUCKPT'
FORMAT_VERSION = 1
MODEL_PREFIXES = ('model_o', 'model_c')


@dataclass
class Checkpoint:
    dual: DualModel
    step: int
    deploy: DeployedModel
    metrics: Dict[str, float]

    def deployed_model(self, which: DeployedModel = None) -> SluModel:
        return self.dual.deployed(which or self.deploy)


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def _write_block(f: BinaryIO, name: str, values: np.ndarray) -> None:
    encoded = name.encode('utf-8')
    f.write(struct.pack('<H', len(encoded)))
    f.write(encoded)
    f.write(struct.pack('<B', values.ndim))
    f.write(struct.pack(f'<{values.ndim}I', *values.shape))
    f.write(np.ascontiguousarray(values, dtype='<f8').tobytes())


def _read_block(f: BinaryIO):
    (name_len,) = struct.unpack('<H', _read_exact(f, 2, 'block name length'))
    name = _read_exact(f, name_len, 'block name').decode('utf-8')
    (ndim,) = struct.unpack('<B', _read_exact(f, 1, f'{name} rank'))
    shape = struct.unpack(f'<{ndim}I', _read_exact(f, 4 * ndim, f'{name} shape'))
    count = int(np.prod(shape)) if ndim else 1
    raw = _read_exact(f, 8 * count, f'{name} values')
    return name, np.frombuffer(raw, dtype='<f8').astype(np.float64).reshape(shape)


class CheckpointService:
    """Save and restore both models of a dual model with their vocabularies"""

    @staticmethod
    def save(path: str, dual: DualModel, step: int, deploy: DeployedModel,
             metrics: Dict[str, float] = None) -> None:
        model = dual.model_o
        header = {
            'format_version': FORMAT_VERSION,
            'encoder': asdict(model.config),
            'label_vocab': model.label_vocab.to_dict(),
            'subword_pieces': model.subword_vocab.pieces,
            'step': step,
            'deploy': deploy.value,
            'metrics': metrics or {},
        }
        encoded = json.dumps(header, sort_keys=True).encode('utf-8')
        blocks = [(f'{prefix}.{name}', values)
                  for prefix, member in zip(MODEL_PREFIXES, (dual.model_o, dual.model_c))
                  for name, values in member.state_dict().items()]

        tmp_path = f'{path}.tmp'
        with open(tmp_path, 'wb') as f:
            f.write(MAGIC)
            f.write(struct.pack('<I', FORMAT_VERSION))
            f.write(struct.pack('<I', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<I', len(blocks)))
            for name, values in blocks:
                _write_block(f, name, values)
        os.replace(tmp_path, path)
        logger.debug("Wrote checkpoint %s (step %d, %d blocks)", path, step, len(blocks))

    @staticmethod
    def load(path: str) -> Checkpoint:
        with open(path, 'rb') as f:
            if _read_exact(f, len(MAGIC), 'magic') != MAGIC:
                raise CheckpointError(f"{path} is not a checkpoint file")
            (version,) = struct.unpack('<I', _read_exact(f, 4, 'version'))
            if version != FORMAT_VERSION:
                raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
            (header_len,) = struct.unpack('<I', _read_exact(f, 4, 'header length'))
            try:
                header = json.loads(_read_exact(f, header_len, 'header').decode('utf-8'))
            except ValueError as exc:
                raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
            (n_blocks,) = struct.unpack('<I', _read_exact(f, 4, 'block count'))
            states = {prefix: OrderedDict() for prefix in MODEL_PREFIXES}
            for _ in range(n_blocks):
                name, values = _read_block(f)
                prefix, _, param = name.partition('.')
                if prefix not in states:
                    raise CheckpointError(f"{path}: unexpected block {name!r}")
                states[prefix][param] = values

        try:
            config = EncoderConfig(**header['encoder'])
            label_vocab = LabelVocab.from_dict(header['label_vocab'])
            subword_vocab = SubwordVocab(header['subword_pieces'])
            models = []
            for prefix in MODEL_PREFIXES:
                model = SluModel(config, label_vocab, subword_vocab)
                model.load_state_dict(states[prefix])
                models.append(model)
            deploy = DeployedModel(header['deploy'])
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: {exc}") from exc

        return Checkpoint(dual=DualModel(*models), step=int(header['step']), deploy=deploy,
                          metrics=header.get('metrics', {}))
