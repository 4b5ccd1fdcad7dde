import logging

from . import conf

LOGGER_NAME = "metivier_lab"

logging.basicConfig(
    level=conf.LOG_LEVEL,
    format="%(asctime)s metivier-lab %(levelname)s [%(module)s] %(message)s",
)


def get_logger():
    return logging.getLogger(LOGGER_NAME)


def set_level(level: int):
    get_logger().setLevel(level)
