from pathlib import Path
from decouple import config
from dotenv import load_dotenv
import dj_database_url

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='sortcell-dev-secret-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = [host.strip() for host in config('ALLOWED_HOSTS', default='localhost,127.0.0.1').split(',')]

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'cell.apps.CellConfig',
    'classify.apps.ClassifyConfig',
    'bench.apps.BenchConfig',
    'rest_framework',
    'corsheaders',
    'django_filters',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'whitenoise.middleware.WhiteNoiseMiddleware',
    'corsheaders.middleware.CorsMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'sortcell.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'sortcell.wsgi.application'

DATABASES = {
    'default': dj_database_url.config(default=config('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}"))
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

STATIC_ROOT = BASE_DIR / 'staticfiles'

STATIC_URL = '/static/'

STORAGES = {
    'default': {'BACKEND': 'django.core.files.storage.FileSystemStorage'},
    'staticfiles': {'BACKEND': 'whitenoise.storage.CompressedManifestStaticFilesStorage'},
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

CORS_ALLOWED_ORIGINS = [
    origin.strip()
    for origin in config('CORS_ALLOWED_ORIGINS', default='http://localhost:3000').split(',')
    if origin.strip()
]

REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': (
        'rest_framework.renderers.JSONRenderer',
        'rest_framework.renderers.BrowsableAPIRenderer',
    ),
    'DEFAULT_AUTHENTICATION_CLASSES': (
        'rest_framework.authentication.SessionAuthentication',
    ),
    'DEFAULT_PERMISSION_CLASSES': (
        'rest_framework.permissions.IsAuthenticatedOrReadOnly',
    ),
    'DEFAULT_FILTER_BACKENDS': (
        'django_filters.rest_framework.DjangoFilterBackend',
    ),
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 100,
}

LOG_LEVEL = config('SORTCELL_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'cell': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'classify': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'bench': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}

# Defaults for every tunable of the sorting cell and the benchmark harness.
# Config files and command-line flags override these; only the live
# endpoint may also come from the environment.
SORTCELL = {
    'ENDPOINT': config('SORTCELL_ENDPOINT', default='http://localhost:11434'),
    'MODEL_NAME': 'gemma3:12b',
    'CLASSIFY_TIMEOUT_S': 30.0,
    'GRASP_TIMEOUT_S': 2.0,
    'SEGMENT_TIMEOUT_S': 5.0,
    'CANDIDATE_BUDGET': 5,
    'PICK_BUDGET': 3,
    'MAX_TRANSITIONS': 20000,
    'DEPTH_DELTA_MM': 5.0,
    'RGB_DELTA': 15,
    'BASELINE_FRAMES': 5,
    'SPREAD_FACTOR': 1.5,
    'TACTILE_GAIN': 0.5,
    'TACTILE_MIN_DELTA': 1.0,
    'TACTILE_CHANNELS': 4,
    'MIN_GRASP_HEIGHT_MM': 5.0,
    'BBOX_MARGIN_PX': 4,
    'PICK_FAILURE_RATE': 0.0,
}
