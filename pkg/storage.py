import hashlib
import logging
import os
from pathlib import Path
from typing import IO, Callable, Optional, Union

from pydantic import BaseModel

logger = logging.getLogger(__name__)

# Чтение больших входов кусками по 1 МБ
_CHUNK_SIZE = 1 << 20


def file_digest(path: Union[str, Path]) -> str:
    """sha256 содержимого файла"""
    digest = hashlib.sha256()
    with open(path, "rb") as stream:
        for chunk in iter(lambda: stream.read(_CHUNK_SIZE), b""):
            digest.update(chunk)
    return digest.hexdigest()


def model_digest(model: BaseModel) -> str:
    """sha256 канонического JSON настроек стадии"""
    return hashlib.sha256(model.model_dump_json().encode("utf-8")).hexdigest()


def stage_key(stage: str, *parts: str) -> str:
    """Ключ стадии: имя + дайджесты входа, настроек и ключи предыдущих стадий"""
    digest = hashlib.sha256(stage.encode("utf-8"))
    for part in parts:
        digest.update(b"\x00")
        digest.update(part.encode("utf-8"))
    return digest.hexdigest()


class StageCache:
    """
    Кэш промежуточных артефактов стадий на диске

    Артефакт лежит в файле <stage>-<ключ>.<расширение>. Ключ меняется при
    любом изменении входа или настроек, поэтому старые файлы просто
    перестают находиться.
    """

    def __init__(self, root: Union[str, Path], enabled: bool = True):
        self.root = Path(root)
        self.enabled = enabled

    def path(self, stage: str, key: str, suffix: str = "jsonl") -> Path:
        return self.root / f"{stage}-{key[:24]}.{suffix}"

    def lookup(self, stage: str, key: str, suffix: str = "jsonl") -> Optional[Path]:
        if not self.enabled:
            return None
        path = self.path(stage, key, suffix)
        if path.is_file():
            logger.debug(f"💾 Найден артефакт {path.name}")
            return path
        return None

    def store(
        self,
        stage: str,
        key: str,
        writer: Callable[[IO[str]], None],
        suffix: str = "jsonl",
    ) -> Optional[Path]:
        """Пишет артефакт через временный файл и атомарно переименовывает"""
        if not self.enabled:
            return None
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(stage, key, suffix)
        temporary = path.with_name(f".{path.name}.{os.getpid()}.tmp")
        try:
            with open(temporary, "w", encoding="utf-8", newline="") as stream:
                writer(stream)
            os.replace(temporary, path)
        except OSError as e:
            temporary.unlink(missing_ok=True)
            logger.warning(f"⚠️ Не удалось сохранить артефакт {path.name}: {e}")
            return None
        logger.debug(f"💾 Сохранён артефакт {path.name}")
        return path

