"""Exception hierarchy shared by all modules."""


class SasfancError(Exception):
    """Base class for every error raised by this package."""


class BandSpecError(SasfancError, ValueError):
    pass


class SizeError(SasfancError, ValueError):
    pass


class DimensionError(SasfancError, ValueError):
    pass


class ConfigError(SasfancError, ValueError):
    pass


class DegenerateInputError(SasfancError, ValueError):
    pass


class NumericError(SasfancError, ArithmeticError):
    pass


class TrainingError(SasfancError, RuntimeError):
    """A training run did not reach the required noise reduction."""

    def __init__(self, noise_index, final_nr_db, threshold_db):
        self.noise_index = noise_index
        self.final_nr_db = final_nr_db
        self.threshold_db = threshold_db
        super().__init__(
            f"training noise {noise_index} reached only {final_nr_db:.2f} dB "
            f"(threshold {threshold_db:.2f} dB)"
        )


# WAV ingestion
class WavError(SasfancError):
    pass


class WavNotFoundError(WavError, FileNotFoundError):
    pass


class MultiChannelError(WavError, ValueError):
    pass


class UnsupportedEncodingError(WavError, ValueError):
    pass


class SampleRateError(WavError, ValueError):
    pass


# database persistence
class DatabaseError(SasfancError):
    pass


class RangeError(DatabaseError, IndexError):
    pass


class DuplicateRecordError(DatabaseError, KeyError):
    pass


class IncompleteDatabaseError(DatabaseError):
    pass


class FormatError(DatabaseError, ValueError):
    """Bad magic bytes or unknown file kind."""


class VersionError(DatabaseError, ValueError):
    pass


class TruncationError(DatabaseError, ValueError):
    pass


class ChecksumError(DatabaseError, ValueError):
    pass


class IncompatibleBankError(DatabaseError, ValueError):
    pass
