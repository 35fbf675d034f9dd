from loguru import logger



logger.disable('ergodic_in')
