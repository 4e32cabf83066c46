from typing import Optional


class EcomigrateError(Exception):
    """Базовая ошибка пайплайна"""


class ConfigError(EcomigrateError):
    """Некорректная конфигурация"""


class MalformedVersion(EcomigrateError):
    """Строку версии нельзя привести к major.minor.patch"""

    def __init__(self, text: str):
        super().__init__(f"Некорректная версия: {text!r}")
        self.text = text


class MalformedDocument(EcomigrateError):
    """Документ пакета в NDJSON не читается"""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"Строка {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class EmptyCorpus(EcomigrateError):
    """Нет ни одного изменения зависимостей для медианы"""


class EmptyGraph(EcomigrateError):
    """PageRank на пустом графе"""


class TooFewPoints(EcomigrateError):
    """Ряд слишком короткий для теста Манна-Кендалла"""


class MalformedManifest(EcomigrateError):
    """package.json не парсится"""


class HostUnavailable(EcomigrateError):
    """Хостинг репозиториев недоступен или бюджет запросов исчерпан"""


class BudgetExhausted(HostUnavailable):
    """Запросы к хосту кончились"""


class InconsistentSpec(EcomigrateError):
    """Сценарий генератора противоречив"""


class StageError(EcomigrateError):
    """Ошибка стадии пайплайна"""

    def __init__(self, stage: str, cause: Optional[BaseException] = None):
        message = f"Стадия '{stage}' завершилась с ошибкой"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
        self.stage = stage
        self.cause = cause
