# config.py - Configuración centralizada de multicarga
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from .constants import MAX_DIMENSION

# Cargar variables de entorno desde .env
load_dotenv()


class Config:
    """Configuración centralizada de la aplicación."""

    # Configuración de archivos: la única variable que afecta a los artefactos
    BASE_DIR = Path.cwd()
    OUTPUT_DIR = Path(os.environ.get('MULTICARGA_OUTPUT_DIR', 'resultados'))

    # Configuración de logging (no cambia ningún resultado numérico)
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    LOG_FILE = os.environ.get('LOG_FILE', 'multicarga.log')
    LOG_MAX_BYTES = int(os.environ.get('LOG_MAX_BYTES', 2 * 1024 * 1024))  # 2MB
    LOG_BACKUP_COUNT = int(os.environ.get('LOG_BACKUP_COUNT', 5))

    # Límites de cálculo
    MAX_DIMENSION = MAX_DIMENSION

    @staticmethod
    def init_app(config=None):
        """
        Configura logging con rotación y consola rich. El directorio de salida
        se crea al escribir el primer reporte, nunca antes de validar.
        """
        config = config or Config

        from logging.handlers import RotatingFileHandler
        from rich.logging import RichHandler

        root_logger = logging.getLogger()
        root_logger.setLevel(getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO))
        if any(getattr(h, '_multicarga', False) for h in root_logger.handlers):
            return

        handler = RotatingFileHandler(
            config.LOG_FILE,
            maxBytes=config.LOG_MAX_BYTES,
            backupCount=config.LOG_BACKUP_COUNT,
            encoding='utf-8',
        )
        handler.setFormatter(logging.Formatter(config.LOG_FORMAT))
        handler._multicarga = True
        root_logger.addHandler(handler)

        console = RichHandler(rich_tracebacks=False, show_path=False)
        console.setLevel(logging.WARNING)
        console._multicarga = True
        root_logger.addHandler(console)

        if os.environ.get('MULTICARGA_OUTPUT_DIR'):
            logging.info("✅ Directorio de salida cargado desde variables de entorno")
